//! Lists seeds whose FOOD/EXIT class means are closest in both modalities.
//!
//! `cargo run --release --example mean_geometry -- <config.toml> <n_seeds>`

use intent_poe::{generate_dataset, GenConfig, IntentLabel};

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn main() -> intent_poe::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let base = GenConfig::from_toml(&std::fs::read_to_string(&args[0])?)?;
    let n: u64 = args.get(1).map_or(200, |s| s.parse().expect("n_seeds"));
    let mut rows = Vec::new();
    for seed in 0..n {
        // Near-zero noise and no video effect expose the unit class means.
        let probe = GenConfig {
            seed,
            n_videos: 40,
            video_effect_scale: 0.0,
            noise_scale: 1e-12,
            pose_separation: 1.0,
            audio_separation: 1.0,
            ..base.clone()
        };
        let ds = generate_dataset(&probe)?;
        let find = |l: IntentLabel| ds.clips.iter().find(|c| c.label == l);
        let (Some(f), Some(e)) = (find(IntentLabel::Food), find(IntentLabel::Exit)) else {
            continue;
        };
        let cp = cos(&f.pose_features, &e.pose_features);
        let ca = cos(&f.audio_features, &e.audio_features);
        let real = generate_dataset(&GenConfig { seed, ..base.clone() })?;
        rows.push((cp.min(ca), seed, cp, ca, real.len()));
    }
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (_, seed, cp, ca, len) in rows.iter().take(15) {
        println!("seed={seed} cos_pose={cp:.3} cos_audio={ca:.3} clips={len}");
    }
    Ok(())
}
