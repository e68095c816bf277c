import init, { traceFeature, histograms, augmentationCosines } from "./pkg/rdcnn_wasm.js";

const SIZE = 28;
const BINS = 32;
const pad = document.getElementById("pad");
const ctx = pad.getContext("2d");
const $ = (id) => document.getElementById(id);

function clearPad() {
  ctx.fillStyle = "#000";
  ctx.fillRect(0, 0, pad.width, pad.height);
}

function sampleDigit() {
  clearPad();
  ctx.strokeStyle = "#fff";
  ctx.lineWidth = 22;
  ctx.lineCap = "round";
  ctx.beginPath();
  ctx.moveTo(90, 70);
  ctx.quadraticCurveTo(200, 40, 180, 120);
  ctx.lineTo(100, 220);
  ctx.lineTo(200, 215);
  ctx.stroke();
}

// Downsample the pad to SIZE x SIZE grayscale bytes.
function pixels() {
  const small = document.createElement("canvas");
  small.width = small.height = SIZE;
  const s = small.getContext("2d");
  s.drawImage(pad, 0, 0, SIZE, SIZE);
  const rgba = s.getImageData(0, 0, SIZE, SIZE).data;
  const out = new Uint8Array(SIZE * SIZE);
  for (let i = 0; i < out.length; i++) out[i] = rgba[4 * i];
  return out;
}

function params() {
  return {
    k: Number($("k").value),
    b: Number($("b").value),
    m: Math.max(1, Number($("m").value) | 0),
    seed: Math.max(0, Number($("seed").value) | 0),
    index: Math.max(0, Number($("index").value) | 0),
    copies: Math.max(1, Number($("copies").value) | 0),
  };
}

function drawMap(values, w, h, scale) {
  const c = document.createElement("canvas");
  c.width = w;
  c.height = h;
  c.style.width = `${w * scale}px`;
  c.style.height = `${h * scale}px`;
  let lo = Infinity, hi = -Infinity;
  for (const v of values) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  const span = hi - lo || 1;
  const img = c.getContext("2d").createImageData(w, h);
  values.forEach((v, i) => {
    const g = Math.round((255 * (v - lo)) / span);
    img.data.set([g, g, g, 255], 4 * i);
  });
  c.getContext("2d").putImageData(img, 0, 0);
  return c;
}

function bars(canvas, values, lo, hi, color) {
  const g = canvas.getContext("2d");
  g.clearRect(0, 0, canvas.width, canvas.height);
  const top = Math.max(hi, ...values) - lo || 1;
  const w = canvas.width / values.length;
  g.fillStyle = color;
  values.forEach((v, i) => {
    const h = ((v - lo) / top) * (canvas.height - 4);
    g.fillRect(i * w + 1, canvas.height - h, Math.max(1, w - 2), h);
  });
}

function render() {
  const p = params();
  const px = pixels();
  $("error").textContent = "";
  try {
    const t = traceFeature(px, SIZE, SIZE, p.k, p.b, p.seed, p.index);
    const stages = $("stages");
    stages.replaceChildren();
    for (let i = 0; i < t.count(); i++) {
      const div = document.createElement("div");
      div.className = "stage";
      const w = t.width(i);
      div.append(drawMap(t.data(i), w, t.height(i), Math.max(2, Math.floor(112 / w))));
      div.append(`${t.name(i)} (${w}x${t.height(i)})`);
      stages.append(div);
    }
    $("value").textContent = `feature ${p.index} = ${t.feature().toFixed(4)}`;
    t.free();

    const h = histograms(px, SIZE, SIZE, p.k, p.b, p.m, p.seed, BINS);
    bars($("pixelHist"), Array.from(h.pixel()), 0, 0, "#4a6fa5");
    bars($("featureHist"), Array.from(h.feature()), 0, 0, "#c0504d");
    h.free();

    const cos = Array.from(augmentationCosines(px, SIZE, SIZE, p.k, p.b, p.m, p.seed, p.copies));
    bars($("cosines"), cos, Math.min(0, ...cos), 1, "#5b9b5b");
    const mean = cos.reduce((a, v) => a + v, 0) / cos.length;
    $("cosMean").textContent = `mean ${mean.toFixed(3)}, min ${Math.min(...cos).toFixed(3)}`;
  } catch (e) {
    $("error").textContent = String(e.message ?? e);
  }
}

let drawing = false;
function stroke(ev) {
  const r = pad.getBoundingClientRect();
  ctx.fillStyle = "#fff";
  ctx.beginPath();
  ctx.arc(ev.clientX - r.left, ev.clientY - r.top, 11, 0, 2 * Math.PI);
  ctx.fill();
}

pad.addEventListener("pointerdown", (ev) => { drawing = true; pad.setPointerCapture(ev.pointerId); stroke(ev); });
pad.addEventListener("pointermove", (ev) => { if (drawing) stroke(ev); });
pad.addEventListener("pointerup", () => { drawing = false; render(); });
$("clear").addEventListener("click", () => { clearPad(); render(); });
$("sample").addEventListener("click", () => { sampleDigit(); render(); });
for (const id of ["k", "b", "m", "seed", "index", "copies"]) $(id).addEventListener("change", render);

await init();
sampleDigit();
render();
