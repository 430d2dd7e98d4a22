/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_bellresult_free: (a: number, b: number) => void;
export const __wbg_get_bellresult_cost: (a: number) => number;
export const __wbg_get_bellresult_f_eff: (a: number) => number;
export const __wbg_get_bellresult_fidelity: (a: number) => number;
export const __wbg_get_bellresult_iterations: (a: number) => number;
export const __wbg_get_bellresult_p: (a: number) => number;
export const __wbg_get_bellresult_p_eff: (a: number) => number;
export const __wbg_set_bellresult_cost: (a: number, b: number) => void;
export const __wbg_set_bellresult_f_eff: (a: number, b: number) => void;
export const __wbg_set_bellresult_fidelity: (a: number, b: number) => void;
export const __wbg_set_bellresult_iterations: (a: number, b: number) => void;
export const __wbg_set_bellresult_p: (a: number, b: number) => void;
export const __wbg_set_bellresult_p_eff: (a: number, b: number) => void;
export const bellresult_params: (a: number) => [number, number];
export const optimizeBell: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const perturbBell: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const squeezedDistribution: (a: number, b: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
