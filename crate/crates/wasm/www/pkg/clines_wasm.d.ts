/* tslint:disable */
/* eslint-disable */

/**
 * The reduced equation started from the standing wave, advanced on demand.
 */
export class Simulation {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Position of the `u = 1/2` crossing, NaN if there is none.
     */
    front(): number;
    /**
     * Starts from the `eps = 0` standing wave so that the drift seen on
     * screen is the bias `eps` alone.
     */
    constructor(s_cost: number, r: number, eps: number, dx: number);
    nodes(): Float64Array;
    /**
     * Advances `n` steps.
     */
    step(n: number): void;
    time(): number;
    values(): Float64Array;
}

/**
 * Rows `[r, c1, series, c1*]` for `n` values of `r` spread evenly over
 * `[r_min, r_max]`, flattened.
 */
export function c1_curve(s_cost: number, r_min: number, r_max: number, n: number): Float64Array;

/**
 * Standing wave on `[-x_max, x_max]` with `x_max` chosen from `S`:
 * `[x_0..x_n, u_0..u_n]`.
 */
export function standing_profile(s_cost: number, r: number, dx: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_simulation_free: (a: number, b: number) => void;
    readonly c1_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly simulation_front: (a: number) => number;
    readonly simulation_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly simulation_nodes: (a: number) => [number, number];
    readonly simulation_step: (a: number, b: number) => [number, number];
    readonly simulation_time: (a: number) => number;
    readonly simulation_values: (a: number) => [number, number];
    readonly standing_profile: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
