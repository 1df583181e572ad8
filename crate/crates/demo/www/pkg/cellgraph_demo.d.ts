/* tslint:disable */
/* eslint-disable */

/**
 * Embeds three 50-D Gaussian clusters (20 points each) to 2-D. `param` is the
 * perplexity for t-SNE and the neighbour count for UMAP; PCA ignores it.
 */
export function embed_clusters(method: string, separation: number, param: number, seed: number): string;

/**
 * Semi-supervised GRAND on two half-moons with `labeled` known labels per
 * class; reports unlabeled-node accuracy, probabilities and the loss curve.
 */
export function grand_moons(per_class: number, labeled: number, drop_rate: number, epochs: number, seed: number): string;

/**
 * Texture patch plus its GLCM and GLRLM features.
 */
export function texture_features(size: number, roughness: number, amplitude: number, levels: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly embed_clusters: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly grand_moons: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly texture_features: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
