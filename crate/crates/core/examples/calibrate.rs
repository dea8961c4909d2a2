//! Prints the benchmark trend metrics for a generator config.
//!
//! `cargo run --release --example calibrate -- [config.toml] [seed]`

use std::time::Instant;

use intent_poe::analysis::{accuracy_coverage_curve, ambiguous_subset, shortcut_failure_rates};
use intent_poe::eval::{alpha_sweep_on_folds, evaluate_folds, fit_folds, DEFAULT_ALPHA_GRID};
use intent_poe::fusion::Components;
use intent_poe::{generate_dataset, validate_dataset, ContextState, FusionConfig, GenConfig, IntentLabel, Method, TrainConfig};

fn main() -> intent_poe::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = match args.first() {
        Some(p) => GenConfig::from_toml(&std::fs::read_to_string(p)?)?,
        None => intent_poe::synth::paperlike_config(),
    };
    if let Some(s) = args.get(1) {
        cfg.seed = s.parse().expect("seed");
    }
    let ds = generate_dataset(&cfg)?;
    let summary = validate_dataset(&ds)?;
    println!("seed={} clips={} counts={:?}", cfg.seed, ds.len(), summary.counts);
    for c in ContextState::AMBIGUOUS {
        let idle = summary.count(c, IntentLabel::Idle) as f64;
        let goal = summary.count(c, c.shortcut_label().unwrap()) as f64;
        println!("  {c}: idle share {:.3}", idle / (idle + goal));
    }

    let t = Instant::now();
    let needs = Method::ALL.iter().map(|m| m.needs()).fold(Components::default(), Components::union);
    let folds = fit_folds(&ds, needs, &TrainConfig::default())?;
    println!("fit_folds {:.1}s", t.elapsed().as_secs_f64());
    let mut acc = std::collections::HashMap::new();
    let mut rates_by = std::collections::HashMap::new();
    let mut cov = std::collections::HashMap::new();
    for m in Method::ALL {
        let r = evaluate_folds(&ds, &folds, &FusionConfig::new(m))?;
        let rates = shortcut_failure_rates(r.predictions());
        let amb = ambiguous_subset(r.predictions());
        let curve = accuracy_coverage_curve(&amb, "ambiguous")?;
        println!(
            "{} bowl_fail={:?} door_fail={:?} acc@50={:?}",
            r.summary_line(),
            rates.rate(ContextState::NearBowl),
            rates.rate(ContextState::NearDoor),
            curve.accuracy_at(0.5)
        );
        acc.insert(m, r.mean_fold_accuracy);
        rates_by.insert(m, ContextState::AMBIGUOUS.map(|c| rates.rate(c).unwrap_or(f64::NAN)));
        cov.insert(m, curve.accuracy_at(0.5).unwrap_or(f64::NAN));
    }
    let sweep: Vec<f64> = alpha_sweep_on_folds(&ds, &folds, &DEFAULT_ALPHA_GRID)?
        .iter()
        .map(|r| r.mean_fold_accuracy)
        .collect();
    for (a, v) in DEFAULT_ALPHA_GRID.iter().zip(&sweep) {
        println!("  alpha={a} mean_acc={v:.4}");
    }

    let poe = acc[&Method::PoeFull];
    let ctx_rates = rates_by[&Method::ContextOnly];
    let poe_rates = rates_by[&Method::PoeFull];
    let checks = [
        ("shortcut", ctx_rates == [1.0, 1.0] && poe_rates[0] < 1.0 && poe_rates[1] < 1.0),
        ("alpha_gap", poe - sweep[0] >= 0.15 && sweep.iter().all(|v| *v >= sweep[0])),
        (
            "ordering",
            poe >= acc[&Method::FeatureConcat]
                && poe >= acc[&Method::PoseOnly]
                && poe >= acc[&Method::AudioOnly]
                && acc[&Method::AudioOnly] - acc[&Method::PoseOnly] >= 0.05,
        ),
        ("coverage", cov[&Method::PoeFull] > cov[&Method::ContextOnly]),
    ];
    println!(
        "SUMMARY seed={} gap={:.3} poe={:.3} concat={:.3} audio={:.3} pose={:.3} {}",
        cfg.seed,
        poe - sweep[0],
        poe,
        acc[&Method::FeatureConcat],
        acc[&Method::AudioOnly],
        acc[&Method::PoseOnly],
        checks.iter().map(|(n, ok)| format!("{n}={ok}")).collect::<Vec<_>>().join(" ")
    );
    println!("total {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
