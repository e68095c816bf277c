/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_histogrampair_free: (a: number, b: number) => void;
export const __wbg_trace_free: (a: number, b: number) => void;
export const augmentationCosines: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
export const histogrampair_feature: (a: number) => [number, number];
export const histogrampair_pixel: (a: number) => [number, number];
export const histograms: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
export const traceFeature: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
export const trace_count: (a: number) => number;
export const trace_data: (a: number, b: number) => [number, number];
export const trace_feature: (a: number) => number;
export const trace_height: (a: number, b: number) => number;
export const trace_name: (a: number, b: number) => [number, number];
export const trace_width: (a: number, b: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
