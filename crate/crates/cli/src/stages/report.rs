//! report: the summary tables gathered into one Markdown document.

use std::fmt::Write as _;

use serde_json::json;

use super::*;

const SECTIONS: [(&str, &str); 7] = [
    ("Questions per program", INGEST_SUMMARY),
    ("Cross-validation", CV_SUMMARY),
    ("Transfer between programs", TRANSFER_SUMMARY),
    ("Keyword baselines", BASELINE_SUMMARY),
    ("Package feature associations", ASSOCIATION),
    ("Growth forecasts", FORECAST),
    ("Growth parameters by category", GROWTH_COMPARISON),
];

fn markdown_table(out: &mut String, tsv: &str) {
    let mut lines = tsv.lines().filter(|l| !l.is_empty());
    let Some(header) = lines.next() else {
        out.push_str("(empty)\n");
        return;
    };
    let cols: Vec<&str> = header.split('\t').collect();
    writeln!(out, "| {} |", cols.join(" | ")).unwrap();
    writeln!(out, "|{}", "---|".repeat(cols.len())).unwrap();
    for line in lines {
        writeln!(out, "| {} |", line.split('\t').collect::<Vec<_>>().join(" | ")).unwrap();
    }
}

/// Mean forecast error per category over the rows that have one.
fn forecast_means(tsv: &str) -> Vec<(String, f64, usize)> {
    let mut lines = tsv.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
    let (Some(cat), Some(err)) =
        (header.iter().position(|h| *h == "category"), header.iter().position(|h| *h == "error_percent"))
    else {
        return Vec::new();
    };
    let mut acc: Vec<(String, f64, usize)> = Vec::new();
    for line in lines {
        let cells: Vec<&str> = line.split('\t').collect();
        let (Some(c), Some(e)) = (cells.get(cat), cells.get(err).and_then(|e| e.parse::<f64>().ok())) else {
            continue;
        };
        match acc.iter_mut().find(|(name, _, _)| name == c) {
            Some(entry) => {
                entry.1 += e;
                entry.2 += 1;
            }
            None => acc.push((c.to_string(), e, 1)),
        }
    }
    acc.into_iter().map(|(c, sum, n)| (c, sum / n as f64, n)).collect()
}

pub fn report(ctx: &Ctx) -> CliResult<()> {
    let mut run = ctx.stage("report", None, json!({}));
    let mut declared: Vec<_> = SECTIONS.iter().map(|(_, rel)| ctx.ws.path(rel)).collect();
    declared.push(ctx.ws.path(SUBSETS_SUMMARY));
    run.require(&declared.iter().map(|p| p.as_path()).collect::<Vec<_>>())?;

    let mut doc = String::from("# Pipeline report\n");
    for (title, rel) in SECTIONS {
        let bytes = run.read_ws(rel)?;
        let text = String::from_utf8_lossy(&bytes);
        write!(doc, "\n## {title}\n\nSource: `{rel}`\n\n").unwrap();
        markdown_table(&mut doc, &text);
        if rel == FORECAST {
            doc.push('\n');
            for (category, mean, n) in forecast_means(&text) {
                writeln!(doc, "Mean error for {category}: {mean:.2}% over {n} series.").unwrap();
            }
        }
    }
    let bytes = run.read_ws(SUBSETS_SUMMARY)?;
    let subsets: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("report: invalid {SUBSETS_SUMMARY}: {e}")))?;
    write!(doc, "\n## Best feature subsets\n\nSource: `{SUBSETS_SUMMARY}`\n\n").unwrap();
    if let Some(map) = subsets.as_object() {
        for (response, s) in map {
            let features: Vec<String> = s["best_features"]
                .as_array()
                .map(|a| a.iter().filter_map(|f| f.as_str().map(str::to_string)).collect())
                .unwrap_or_default();
            writeln!(
                doc,
                "- {response}: {} (R² {}, {} of {} subsets singular)",
                features.join(", "),
                s["best_r_squared"],
                s["singular"],
                s["evaluated"]
            )
            .unwrap();
        }
    }
    run.write(REPORT, doc.into_bytes())?;
    run.finish()
}
