/* tslint:disable */
/* eslint-disable */

/**
 * RGBA bytes of three `size × size` panels side by side: the scene, its
 * distortion at normalized parameter `t`, and the rectification of that
 * distortion with normalized parameter `t_fix`.
 */
export function distortion_preview(seed: number, model: string, t: number, t_fix: number, size: number): Uint8Array;

/**
 * Largest distorted radius with a finite normal radius, or +∞.
 */
export function domain_limit(model: string, t: number): number;

/**
 * Total self-supervised loss (intra + inter over DM/ED) of a synthesized
 * group as one slot's normalized parameter sweeps `[0, 1]`, every other
 * parameter held at its true value.
 *
 * The last element is the true normalized value of the swept slot.
 */
export function loss_landscape(seed: number, model: string, slot: number, samples: number, size: number): Float64Array;

/**
 * `samples` normal radii for distorted radii evenly spaced on `[0, 1]`;
 * NaN past the model's singularity.
 */
export function radial_curve(model: string, t: number, samples: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly distortion_preview: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly domain_limit: (a: number, b: number, c: number) => [number, number, number];
    readonly loss_landscape: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly radial_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
