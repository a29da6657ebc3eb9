/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_simulation_free: (a: number, b: number) => void;
export const c1_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const simulation_front: (a: number) => number;
export const simulation_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const simulation_nodes: (a: number) => [number, number];
export const simulation_step: (a: number, b: number) => [number, number];
export const simulation_time: (a: number) => number;
export const simulation_values: (a: number) => [number, number];
export const standing_profile: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
