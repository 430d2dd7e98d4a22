/* tslint:disable */
/* eslint-disable */

/**
 * Outcome of a Bell-state optimization on two heralds, no gadgets.
 */
export class BellResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Optimized parameter vector: squeezers, mesh angles, output phases.
     */
    readonly params: Float64Array;
    cost: number;
    f_eff: number;
    fidelity: number;
    iterations: number;
    p_eff: number;
    p: number;
}

export function optimizeBell(seed: number, restarts: number, iterations: number, w1: number, w2: number, postselect: boolean): BellResult;

export function perturbBell(params: Float64Array, delta: number, trials: number, seed: number, postselect: boolean): Float64Array;

export function squeezedDistribution(r: number, max_photons: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_bellresult_free: (a: number, b: number) => void;
    readonly __wbg_get_bellresult_cost: (a: number) => number;
    readonly __wbg_get_bellresult_f_eff: (a: number) => number;
    readonly __wbg_get_bellresult_fidelity: (a: number) => number;
    readonly __wbg_get_bellresult_iterations: (a: number) => number;
    readonly __wbg_get_bellresult_p: (a: number) => number;
    readonly __wbg_get_bellresult_p_eff: (a: number) => number;
    readonly __wbg_set_bellresult_cost: (a: number, b: number) => void;
    readonly __wbg_set_bellresult_f_eff: (a: number, b: number) => void;
    readonly __wbg_set_bellresult_fidelity: (a: number, b: number) => void;
    readonly __wbg_set_bellresult_iterations: (a: number, b: number) => void;
    readonly __wbg_set_bellresult_p: (a: number, b: number) => void;
    readonly __wbg_set_bellresult_p_eff: (a: number, b: number) => void;
    readonly bellresult_params: (a: number) => [number, number];
    readonly optimizeBell: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly perturbBell: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly squeezedDistribution: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
