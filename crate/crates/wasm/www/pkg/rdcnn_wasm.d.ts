/* tslint:disable */
/* eslint-disable */

export class HistogramPair {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Bin masses over [-1, 1].
     */
    feature(): Float64Array;
    /**
     * Bin masses over [0, 1] after scaling pixels by 1/255.
     */
    pixel(): Float64Array;
}

/**
 * Named maps from one traced feature, input first.
 */
export class Trace {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Number of stored maps.
     */
    count(): number;
    /**
     * Row-major values of map `i`.
     */
    data(i: number): Float32Array;
    /**
     * The final pooled value.
     */
    feature(): number;
    height(i: number): number;
    name(i: number): string;
    width(i: number): number;
}

/**
 * Cosine similarity of each random flip/rotation of the image to the
 * original, in feature space.
 */
export function augmentationCosines(pixels: Uint8Array, width: number, height: number, kernel_size: number, blocks: number, num_kernels: number, seed: number, count: number): Float64Array;

/**
 * Value distributions of the pixels and of the extracted features.
 */
export function histograms(pixels: Uint8Array, width: number, height: number, kernel_size: number, blocks: number, num_kernels: number, seed: number, bins: number): HistogramPair;

/**
 * Intermediate maps of feature `index` for the given network.
 */
export function traceFeature(pixels: Uint8Array, width: number, height: number, kernel_size: number, blocks: number, seed: number, index: number): Trace;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_histogrampair_free: (a: number, b: number) => void;
    readonly __wbg_trace_free: (a: number, b: number) => void;
    readonly augmentationCosines: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly histogrampair_feature: (a: number) => [number, number];
    readonly histogrampair_pixel: (a: number) => [number, number];
    readonly histograms: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
    readonly traceFeature: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly trace_count: (a: number) => number;
    readonly trace_data: (a: number, b: number) => [number, number];
    readonly trace_feature: (a: number) => number;
    readonly trace_height: (a: number, b: number) => number;
    readonly trace_name: (a: number, b: number) => [number, number];
    readonly trace_width: (a: number, b: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
