//! wasm-bindgen wrappers behind `www/index.html`. Every export takes plain
//! numbers and returns a JSON string, so the page needs no bindings beyond
//! the generated glue.

use cellgraph::dataset::ChannelImage;
use cellgraph::dimred::{knn_purity, reduce, Method, ReduceConfig};
use cellgraph::features::radiomics::{glcm, glcm_features, glrlm, glrlm_features, quantize, DEFAULT_OFFSETS};
use cellgraph::grand::{predict_grand, train_grand, GrandConfig};
use cellgraph::graph::{knn_feature_graph, normalize_adjacency, Metric};
use cellgraph::rng;
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn finish(v: Result<Value, String>) -> String {
    match v {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn normal(g: &mut rng::Rng) -> f64 {
    StandardNormal.sample(g)
}

/// Square textured patch mixing white noise with 3x3-smoothed noise.
/// `roughness` in [0, 1] is the white-noise share; `amplitude` scales the
/// noise around a mid-gray baseline.
pub fn texture_patch(size: usize, roughness: f64, amplitude: f64, seed: u64) -> Vec<u16> {
    let mut g = rng::from_seed(seed);
    let white: Vec<f64> = (0..size * size).map(|_| normal(&mut g)).collect();
    let at = |r: isize, c: isize| {
        white[(r.rem_euclid(size as isize) as usize) * size + c.rem_euclid(size as isize) as usize]
    };
    (0..size * size)
        .map(|i| {
            let (r, c) = ((i / size) as isize, (i % size) as isize);
            let mut smooth = 0.0;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    smooth += at(r + dr, c + dc);
                }
            }
            // Box-smoothed noise has sd 1/3; rescale to unit sd before mixing.
            let v = roughness * white[i] + (1.0 - roughness) * smooth;
            (30000.0 + amplitude * 4000.0 * v).clamp(0.0, 65535.0) as u16
        })
        .collect()
}

fn texture_json(size: usize, roughness: f64, amplitude: f64, levels: usize, seed: u64) -> Result<Value, String> {
    let pixels = texture_patch(size, roughness, amplitude, seed);
    let image = ChannelImage::new(size, size, pixels.clone()).map_err(|e| e.to_string())?;
    let all: Vec<usize> = (0..size * size).collect();
    let q = quantize(&image, &all, levels);
    let m = glcm(&q, &DEFAULT_OFFSETS, true).map_err(|e| e.to_string())?;
    let f = glcm_features(&m);
    let runs = glrlm(&q, &DEFAULT_OFFSETS);
    let r = glrlm_features(&runs, size * size).map_err(|e| e.to_string())?;
    let (lo, hi) = (*pixels.iter().min().unwrap(), *pixels.iter().max().unwrap());
    let span = f64::from(hi.saturating_sub(lo)).max(1.0);
    let gray: Vec<u8> = pixels.iter().map(|&v| (f64::from(v - lo) / span * 255.0).round() as u8).collect();
    Ok(json!({
        "size": size,
        "gray": gray,
        "glcm": { "contrast": f.contrast, "correlation": f.correlation, "asm": f.angular_second_moment,
                  "idm": f.inverse_difference_moment, "entropy": f.entropy },
        "glrlm": { "sre": r.short_run_emphasis, "lre": r.long_run_emphasis, "gln": r.gray_level_nonuniformity,
                   "rln": r.run_length_nonuniformity, "rp": r.run_percentage },
        "glcm_matrix": m.p,
        "levels": levels,
    }))
}

/// Texture patch plus its GLCM and GLRLM features.
#[wasm_bindgen]
pub fn texture_features(size: usize, roughness: f64, amplitude: f64, levels: usize, seed: u32) -> String {
    finish(texture_json(size.clamp(8, 128), roughness.clamp(0.0, 1.0), amplitude, levels.clamp(2, 64), u64::from(seed)))
}

/// `clusters` Gaussian blobs of `per_cluster` points in `dim` dimensions with
/// centres drawn at scale `separation`.
pub fn gaussian_blobs(
    clusters: usize,
    per_cluster: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> (Array2<f64>, Vec<usize>) {
    let mut g = rng::from_seed(seed);
    let centres: Vec<Vec<f64>> =
        (0..clusters).map(|_| (0..dim).map(|_| separation * normal(&mut g)).collect()).collect();
    let n = clusters * per_cluster;
    let labels: Vec<usize> = (0..n).map(|i| i / per_cluster).collect();
    let x = Array2::from_shape_fn((n, dim), |(i, j)| centres[labels[i]][j] + normal(&mut g));
    (x, labels)
}

fn embed_json(method: &str, separation: f64, param: f64, seed: u64) -> Result<Value, String> {
    let method = Method::parse(method).filter(|m| *m != Method::None).ok_or("method must be pca, tsne or umap")?;
    let (x, labels) = gaussian_blobs(3, 20, 50, separation / (50f64).sqrt(), seed);
    let mut cfg = ReduceConfig { method, dim: 2, seed, tsne_iters: 500, ..ReduceConfig::default() };
    match method {
        Method::Tsne => cfg.perplexity = param,
        Method::Umap => cfg.n_neighbors = param.round() as usize,
        _ => {}
    }
    let e = reduce(x.view(), &cfg).map_err(|e| e.to_string())?;
    let points: Vec<[f64; 2]> = e.data.rows().into_iter().map(|r| [r[0], r[1]]).collect();
    Ok(json!({ "points": points, "labels": labels, "purity": knn_purity(e.data.view(), &labels, 10) }))
}

/// Embeds three 50-D Gaussian clusters (20 points each) to 2-D. `param` is the
/// perplexity for t-SNE and the neighbour count for UMAP; PCA ignores it.
#[wasm_bindgen]
pub fn embed_clusters(method: &str, separation: f64, param: f64, seed: u32) -> String {
    finish(embed_json(method, separation, param, u64::from(seed)))
}

fn grand_json(per_class: usize, labeled: usize, drop_rate: f64, epochs: usize, seed: u64) -> Result<Value, String> {
    let per_class = per_class.clamp(10, 200);
    let labeled = labeled.clamp(1, per_class - 1);
    let mut g = rng::from_seed(seed);
    // Two interleaved half-moons: feature-space kNN links points along each arc.
    let n = 2 * per_class;
    let mut x = Array2::zeros((n, 2));
    for i in 0..n {
        let class = i / per_class;
        let t = std::f64::consts::PI * g.random::<f64>();
        let (cx, cy) = if class == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
        x[[i, 0]] = cx + 0.08 * normal(&mut g);
        x[[i, 1]] = cy + 0.08 * normal(&mut g);
    }
    let labels: Vec<usize> = (0..n).map(|i| i / per_class).collect();
    let train: Vec<usize> = (0..labeled).chain(per_class..per_class + labeled).collect();
    let graph = knn_feature_graph(x.view(), 6, Metric::Euclidean).map_err(|e| e.to_string())?;
    let adj = normalize_adjacency(&graph);
    let cfg =
        GrandConfig { drop_rate, max_epochs: epochs.clamp(1, 1000), patience: epochs, seed, ..GrandConfig::default() };
    let model = train_grand(&adj, &x, &labels, &train, &[], &cfg).map_err(|e| e.to_string())?;
    let p = predict_grand(&model, &adj, &x).map_err(|e| e.to_string())?;
    let prob: Vec<f64> = p.probabilities.column(1).to_vec();
    let unlabeled: Vec<usize> = (0..n).filter(|i| !train.contains(i)).collect();
    let correct = unlabeled.iter().filter(|&&i| p.labels[i] == labels[i]).count();
    let points: Vec<[f64; 2]> = x.rows().into_iter().map(|r| [r[0], r[1]]).collect();
    let edges: Vec<[usize; 2]> = graph.edges.iter().map(|e| [e.src, e.dst]).collect();
    let loss: Vec<f64> = model.history.iter().map(|h| h.loss.total).collect();
    Ok(json!({
        "points": points, "labels": labels, "train": train, "prob": prob, "edges": edges,
        "loss": loss, "best_epoch": model.best_epoch,
        "accuracy": correct as f64 / unlabeled.len() as f64,
    }))
}

/// Semi-supervised GRAND on two half-moons with `labeled` known labels per
/// class; reports unlabeled-node accuracy, probabilities and the loss curve.
#[wasm_bindgen]
pub fn grand_moons(per_class: usize, labeled: usize, drop_rate: f64, epochs: usize, seed: u32) -> String {
    finish(grand_json(per_class, labeled, drop_rate.clamp(0.0, 0.95), epochs, u64::from(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: String) -> Value {
        let v: Value = serde_json::from_str(&s).unwrap();
        assert!(v.get("error").is_none(), "{v}");
        v
    }

    #[test]
    fn rough_textures_have_higher_contrast() {
        let smooth = parse(texture_features(32, 0.0, 1.0, 16, 1));
        let rough = parse(texture_features(32, 1.0, 1.0, 16, 1));
        assert!(rough["glcm"]["contrast"].as_f64() > smooth["glcm"]["contrast"].as_f64());
        assert_eq!(rough["gray"].as_array().unwrap().len(), 32 * 32);
    }

    #[test]
    fn embeddings_separate_clusters() {
        for (m, param) in [("tsne", 10.0), ("umap", 10.0), ("pca", 0.0)] {
            let v = parse(embed_clusters(m, 10.0 * 50f64.sqrt(), param, 3));
            assert!(v["purity"].as_f64().unwrap() >= 0.9, "{m}: {}", v["purity"]);
        }
        assert!(embed_clusters("lda", 1.0, 1.0, 0).contains("error"));
    }

    #[test]
    fn grand_labels_moons_from_few_labels() {
        let v = parse(grand_moons(60, 3, 0.5, 150, 4));
        assert!(v["accuracy"].as_f64().unwrap() >= 0.9, "{}", v["accuracy"]);
        assert_eq!(v["prob"].as_array().unwrap().len(), 120);
    }
}
