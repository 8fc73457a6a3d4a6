//! `report`: markdown summary plus SVG renderings of the plot tables.

use std::fmt::Write as _;
use std::path::Path;

use boolrc::experiments::Summary;
use boolrc::io::{self, PlotTable};

use crate::svg::{Chart, Series, Style};

fn series(table: &PlotTable, x: &str, y: &str, name: &str) -> Series {
    let xs = table.column(x).unwrap_or_default();
    let ys = table.column(y).unwrap_or_default();
    Series { name: name.into(), points: xs.into_iter().zip(ys).collect() }
}

fn chart(table: &PlotTable) -> Option<Chart> {
    let base = |title: &str, x: &str, y: &str| Chart {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        log_y: false,
        style: Style::Lines,
        diagonal: false,
        series: Vec::new(),
    };
    let c = match table.name.as_str() {
        "error_vs_epoch" => Chart {
            log_y: true,
            series: vec![series(table, "k", "eps_mean", "mean error"), series(table, "k", "eps_fit", "exponential fit")],
            ..base("Ensemble-averaged error", "epoch k", "NMSE")
        },
        "minima_distances" => Chart {
            style: Style::Points,
            series: vec![series(table, "bin_lo", "count", "pairs")],
            ..base("Hamming distances between minima", "distance", "count")
        },
        "hamming_vs_epoch" => Chart {
            series: vec![series(table, "k", "h_mean", "observed"), series(table, "k", "h_predicted", "rate model")],
            ..base("Average Hamming distance", "epoch k", "H(k)")
        },
        "path_errors" => Chart {
            series: vec![series(table, "j", "eps_a", "path a"), series(table, "j", "eps_b", "path b")],
            ..base("Inverted paths", "step", "NMSE")
        },
        "gradient_pairs" => {
            let cat = table.column("category").unwrap_or_default();
            let (ga, gb) = (table.column("grad_a").unwrap_or_default(), table.column("grad_b").unwrap_or_default());
            let names = ["below noise", "potentially independent", "dependent"];
            let series = names
                .iter()
                .enumerate()
                .map(|(i, n)| Series {
                    name: (*n).into(),
                    points: (0..cat.len()).filter(|&j| cat[j] == i as f64).map(|j| (ga[j], gb[j])).collect(),
                })
                .collect();
            Chart { style: Style::Points, diagonal: true, series, ..base("Gradient pairs", "grad a", "grad b") }
        }
        _ => return None,
    };
    Some(c)
}

fn markdown(summary: &Summary, manifest: &io::Manifest, figures: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} run\n", summary.kind);
    let _ = writeln!(s, "- nodes: {}", summary.nodes);
    let _ = writeln!(s, "- epochs: {}", summary.epochs);
    let _ = writeln!(s, "- master seed: {}", manifest.master_seed);
    let _ = writeln!(s, "- output noise std: {:.4e}", manifest.sigma_out);
    let _ = writeln!(s, "- config hash: `{}`", manifest.config_hash);
    if let Some(l) = &summary.learning {
        let _ = writeln!(s, "\n## Learning\n");
        let _ = writeln!(s, "| quantity | value |\n|---|---|");
        let _ = writeln!(s, "| minimizers | {} |", l.minimizers);
        let _ = writeln!(s, "| initial error | {:.4e} |", l.mean_error[0]);
        let _ = writeln!(s, "| final mean error | {:.4e} |", l.mean_error[l.mean_error.len() - 1]);
        let _ = writeln!(s, "| exponential rate | {:.4e} (R² {:.3}) |", l.exponential.rate, l.exponential.r_squared);
        let _ = writeln!(s, "| mean k_min | {:.1} ± {:.1} |", l.k_min_mean, l.k_min_std);
        let _ = writeln!(s, "| train / test error | {:.4e} / {:.4e} |", l.train_error_mean, l.test_error_mean);
        if let Some(m) = &l.minima {
            let _ = writeln!(s, "| minima distance | {:.1} ± {:.1} |", m.mean, m.std);
            let _ = writeln!(s, "| mean bit correlation | {:.3} |", m.mean_abs_correlation);
        }
    }
    if let Some(d) = &summary.divergence {
        let _ = writeln!(s, "\n## Divergence\n");
        let _ = writeln!(s, "| quantity | value |\n|---|---|");
        let _ = writeln!(s, "| pairs | {} |", d.pairs);
        let _ = writeln!(s, "| fitted C̃ | {:.4} |", d.fit.params.c_tilde);
        let _ = writeln!(s, "| flip probability C | {:.4} |", d.fit.params.c);
        let _ = writeln!(s, "| fit R² | {:.4} |", d.fit.r_squared);
        let _ = writeln!(s, "| H(K) / (N/2) | {:.3} |", d.final_over_half);
        if let Some(r) = d.error_correlation {
            let _ = writeln!(s, "| error correlation | {r:.3} |");
        }
        for w in &d.fit.warnings {
            let _ = writeln!(s, "\n> {w}");
        }
    }
    if let Some(p) = &summary.inverted_paths {
        let _ = writeln!(s, "\n## Inverted paths\n");
        let _ = writeln!(s, "{} differing dimensions, endpoints exact: {}.\n", p.differing, p.endpoints_exact);
        let _ = writeln!(s, "| category | fraction | 95% interval |\n|---|---|---|");
        for (name, c) in
            [("dependent", &p.dependent), ("potentially independent", &p.potentially_independent), ("below noise", &p.below_noise)]
        {
            let _ = writeln!(s, "| {name} | {:.3} | {:.3} to {:.3} |", c.fraction, c.ci_low, c.ci_high);
        }
    }
    if !figures.is_empty() {
        let _ = writeln!(s, "\n## Figures\n");
        for f in figures {
            let _ = writeln!(s, "![{f}](plots/{f}.svg)");
        }
    }
    s
}

pub fn write(dir: &Path, out: &Path) -> anyhow::Result<()> {
    let run = io::load_run::<f64>(dir)?;
    let summary_path = dir.join("summary.json");
    if !summary_path.is_file() {
        anyhow::bail!("{} has no summary.json; run `analyze` first", dir.display());
    }
    let summary: Summary = io::read_json(&summary_path)?;
    let plots = out.join("plots");
    std::fs::create_dir_all(&plots)?;
    let mut figures = Vec::new();
    for table in io::plot_tables(&summary, run.paths.as_ref()) {
        if let Some(c) = chart(&table) {
            std::fs::write(plots.join(format!("{}.svg", table.name)), c.render())?;
            figures.push(table.name.clone());
        }
    }
    std::fs::write(out.join("report.md"), markdown(&summary, &run.manifest, &figures))?;
    println!("wrote report.md and {} figures to {}", figures.len(), out.display());
    Ok(())
}
