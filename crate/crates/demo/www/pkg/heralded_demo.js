/* @ts-self-types="./heralded_demo.d.ts" */

/**
 * Outcome of a Bell-state optimization on two heralds, no gadgets.
 */
export class BellResult {
    static __wrap(ptr) {
        const obj = Object.create(BellResult.prototype);
        obj.__wbg_ptr = ptr;
        BellResultFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        BellResultFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_bellresult_free(ptr, 0);
    }
    /**
     * Optimized parameter vector: squeezers, mesh angles, output phases.
     * @returns {Float64Array}
     */
    get params() {
        const ret = wasm.bellresult_params(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @returns {number}
     */
    get cost() {
        const ret = wasm.__wbg_get_bellresult_cost(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get f_eff() {
        const ret = wasm.__wbg_get_bellresult_f_eff(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get fidelity() {
        const ret = wasm.__wbg_get_bellresult_fidelity(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get iterations() {
        const ret = wasm.__wbg_get_bellresult_iterations(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get p_eff() {
        const ret = wasm.__wbg_get_bellresult_p_eff(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get p() {
        const ret = wasm.__wbg_get_bellresult_p(this.__wbg_ptr);
        return ret;
    }
    /**
     * @param {number} arg0
     */
    set cost(arg0) {
        wasm.__wbg_set_bellresult_cost(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set f_eff(arg0) {
        wasm.__wbg_set_bellresult_f_eff(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set fidelity(arg0) {
        wasm.__wbg_set_bellresult_fidelity(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set iterations(arg0) {
        wasm.__wbg_set_bellresult_iterations(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set p_eff(arg0) {
        wasm.__wbg_set_bellresult_p_eff(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set p(arg0) {
        wasm.__wbg_set_bellresult_p(this.__wbg_ptr, arg0);
    }
}
if (Symbol.dispose) BellResult.prototype[Symbol.dispose] = BellResult.prototype.free;

/**
 * @param {number} seed
 * @param {number} restarts
 * @param {number} iterations
 * @param {number} w1
 * @param {number} w2
 * @param {boolean} postselect
 * @returns {BellResult}
 */
export function optimizeBell(seed, restarts, iterations, w1, w2, postselect) {
    const ret = wasm.optimizeBell(seed, restarts, iterations, w1, w2, postselect);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return BellResult.__wrap(ret[0]);
}

/**
 * @param {Float64Array} params
 * @param {number} delta
 * @param {number} trials
 * @param {number} seed
 * @param {boolean} postselect
 * @returns {Float64Array}
 */
export function perturbBell(params, delta, trials, seed, postselect) {
    const ptr0 = passArrayF64ToWasm0(params, wasm.__wbindgen_malloc);
    const len0 = WASM_VECTOR_LEN;
    const ret = wasm.perturbBell(ptr0, len0, delta, trials, seed, postselect);
    if (ret[3]) {
        throw takeFromExternrefTable0(ret[2]);
    }
    var v2 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
    wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
    return v2;
}

/**
 * @param {number} r
 * @param {number} max_photons
 * @returns {Float64Array}
 */
export function squeezedDistribution(r, max_photons) {
    const ret = wasm.squeezedDistribution(r, max_photons);
    if (ret[3]) {
        throw takeFromExternrefTable0(ret[2]);
    }
    var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
    wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
    return v1;
}
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg_Error_30c8987f7c2ed4e2: function(arg0, arg1) {
            const ret = Error(getStringFromWasm0(arg0, arg1));
            return ret;
        },
        __wbg___wbindgen_throw_41e9ee4f547fc59a: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./heralded_demo_bg.js": import0,
    };
}

const BellResultFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_bellresult_free(ptr, 1));

function getArrayF64FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getFloat64ArrayMemory0().subarray(ptr / 8, ptr / 8 + len);
}

let cachedFloat64ArrayMemory0 = null;
function getFloat64ArrayMemory0() {
    if (cachedFloat64ArrayMemory0 === null || cachedFloat64ArrayMemory0.byteLength === 0) {
        cachedFloat64ArrayMemory0 = new Float64Array(wasm.memory.buffer);
    }
    return cachedFloat64ArrayMemory0;
}

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

function passArrayF64ToWasm0(arg, malloc) {
    const ptr = malloc(arg.length * 8, 8) >>> 0;
    getFloat64ArrayMemory0().set(arg, ptr / 8);
    WASM_VECTOR_LEN = arg.length;
    return ptr;
}

function takeFromExternrefTable0(idx) {
    const value = wasm.__wbindgen_externrefs.get(idx);
    wasm.__externref_table_dealloc(idx);
    return value;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

let WASM_VECTOR_LEN = 0;

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedFloat64ArrayMemory0 = null;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (!module.ok) {
            throw new Error(`failed to fetch Wasm: ${module.status} ${module.statusText} fetching '${module.url}'`);
        }

        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('heralded_demo_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
