//! Regenerates the bundled mini-corpus under `fixtures/mini`:
//!
//! ```text
//! cargo run -p lanlan-cli --example make_fixtures [-- OUT_DIR]
//! ```
//!
//! Three fake programs, 500 annotated questions plus a few unannotated ones,
//! dated along growth curves; a 10-package feature table; a reference
//! problem series per program; and a small pipeline config.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lanlan_core::growth::{evaluate_model, GrowthParams};
use lanlan_core::ingest::{COVARIATE_NAMES, FEATURE_NAMES, PACKAGE_COLUMN, RESPONSE_NAMES};

const MONTHS: u32 = 36;

struct Program {
    name: &'static str,
    start: (i32, u32),
    problems: usize,
    supports: usize,
    unlabeled: usize,
    problem_beta: f64,
    support_beta: f64,
    functions: &'static [&'static str],
}

const PROGRAMS: [Program; 3] = [
    Program {
        name: "rivulet",
        start: (2014, 3),
        problems: 45,
        supports: 125,
        unlabeled: 12,
        problem_beta: 0.13,
        support_beta: 0.15,
        functions: &["read_stream", "merge_flows", "plot_basin", "gauge_table"],
    },
    Program {
        name: "quarry",
        start: (2015, 1),
        problems: 40,
        supports: 122,
        unlabeled: 12,
        problem_beta: 0.12,
        support_beta: 0.14,
        functions: &["cut_blocks", "load_strata", "core_sample", "drill_log"],
    },
    Program {
        name: "mossbank",
        start: (2013, 9),
        problems: 38,
        supports: 130,
        unlabeled: 12,
        problem_beta: 0.14,
        support_beta: 0.16,
        functions: &["align_spores", "count_reads", "map_colony", "norm_counts"],
    },
];

const OBJECTS: &[&str] = &[
    "data frame", "matrix", "sparse matrix", "list of vectors", "large file", "gzipped input", "factor column",
    "time series", "empty table", "config file", "sample sheet", "remote dataset",
];
const EXCEPTIONS: &[&str] = &[
    "NullPointerException", "IndexOutOfBoundsException", "a segfault", "TypeError", "a stack overflow",
    "IOError", "an assertion failure",
];
const VERBS: &[&str] = &["filter", "export", "subset", "reshape", "annotate", "summarise", "sort", "colour"];
const PROBLEM_TITLES: &[&str] = &[
    "{f} crashes on {o}",
    "{f} fails with {e}",
    "wrong result from {f} after upgrade to {v}",
    "{f} returns NA for every row since {v}",
    "regression in {f} in version {v}",
    "segfault when calling {f} on a {o}",
    "{f} hangs forever with {o}",
];
const PROBLEM_BODIES: &[&str] = &[
    "When I call {f} on a {o} it stops with {e}. This worked in version {v}. {k}",
    "Since upgrading to {v}, {f} throws {e} as soon as the {o} has more than 100 rows. {k}",
    "The output of {f} is wrong: the totals are off by one for every {o}. Downgrading to {v} makes it go away. {k}",
    "{f} never returns when given a {o}. CPU stays at 100% and memory keeps growing. {k}",
];
const SUPPORT_TITLES: &[&str] = &[
    "how to {w} a {o} with {f}",
    "what is the best way to {w} a {o}?",
    "can {f} {w} a {o}?",
    "difference between {f} and {g}",
    "is there a function to {w} a {o}",
    "how do I pass options to {f}",
];
const SUPPORT_BODIES: &[&str] = &[
    "I am new to {p} and want to {w} a {o}. I tried {f} but I am not sure which arguments to use. {k}",
    "Is it possible to {w} a {o} using {f}, or should I use {g} instead? The documentation does not say. {k}",
    "I would like to {w} my {o} before calling {g}. What is the recommended workflow? {k}",
    "Which argument of {f} controls how the {o} is read? I want to {w} it afterwards. {k}",
];
const PROBLEM_KEYWORDS: &[&str] = &[
    "Is this a bug?",
    "Any fix for this problem?",
    "Looks like a bug in the package.",
    "",
    "",
    "",
];
const SUPPORT_KEYWORDS: &[&str] = &["My problem is I do not know where to start.", "", "", "", "", "", ""];
const CODE: &[&str] = &[
    "x &lt;- {f}(input, strict = TRUE)",
    "result = {f}(data)\nprint(result)",
    "{f}(df, cols = c(1, 2, 3))",
];

fn fill(rng: &mut ChaCha8Rng, template: &str, program: &Program, keywords: &[&str]) -> String {
    let f = *program.functions.choose(rng).unwrap();
    let g = *program.functions.choose(rng).unwrap();
    template
        .replace("{f}", f)
        .replace("{g}", g)
        .replace("{p}", program.name)
        .replace("{o}", OBJECTS.choose(rng).unwrap())
        .replace("{e}", EXCEPTIONS.choose(rng).unwrap())
        .replace("{w}", VERBS.choose(rng).unwrap())
        .replace("{v}", &format!("{}.{}.{}", rng.random_range(0..4), rng.random_range(0..12), rng.random_range(0..9)))
        .replace("{k}", keywords.choose(rng).unwrap())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;").replace('\n', "&#xA;")
}

/// Month in `0..MONTHS` drawn so that cumulative counts follow the model.
fn growth_month(rng: &mut ChaCha8Rng, beta: f64) -> u32 {
    let params = GrowthParams { kappa: 1.0, beta, delta: -6.0 };
    let top = evaluate_model(&params, f64::from(MONTHS - 1)).unwrap();
    let u: f64 = rng.random_range(0.0..1.0) * top;
    (0..MONTHS).find(|&t| evaluate_model(&params, f64::from(t)).unwrap() >= u).unwrap_or(MONTHS - 1)
}

fn timestamp(rng: &mut ChaCha8Rng, start: (i32, u32), month: u32) -> String {
    let m0 = start.1 - 1 + month;
    let (year, month) = (start.0 + (m0 / 12) as i32, m0 % 12 + 1);
    format!(
        "{year:04}-{month:02}-{:02}T{:02}:{:02}:{:02}.{:03}",
        rng.random_range(1..=28),
        rng.random_range(0..24),
        rng.random_range(0..60),
        rng.random_range(0..60),
        rng.random_range(0..1000)
    )
}

struct Post {
    id: u64,
    date: String,
    title: String,
    body: String,
    tags: String,
    label: Option<&'static str>,
}

fn make_posts(rng: &mut ChaCha8Rng) -> Vec<Post> {
    let mut posts = Vec::new();
    let mut id = 1000u64;
    for program in &PROGRAMS {
        let kinds = std::iter::repeat_n(Some("problem_report"), program.problems)
            .chain(std::iter::repeat_n(Some("support_request"), program.supports))
            .chain(std::iter::repeat_n(None, program.unlabeled));
        for (i, label) in kinds.enumerate() {
            let problem = match label {
                Some(l) => l == "problem_report",
                None => rng.random_bool(0.25),
            };
            // the first question of each program anchors month 0
            let month = if i == 0 { 0 } else { growth_month(rng, if problem { program.problem_beta } else { program.support_beta }) };
            // some questions read like the other category
            let worded_as_problem = if rng.random_bool(0.12) { !problem } else { problem };
            let (titles, bodies, keywords) = if worded_as_problem {
                (PROBLEM_TITLES, PROBLEM_BODIES, PROBLEM_KEYWORDS)
            } else {
                (SUPPORT_TITLES, SUPPORT_BODIES, SUPPORT_KEYWORDS)
            };
            let (title_t, body_t) = (*titles.choose(rng).unwrap(), *bodies.choose(rng).unwrap());
            let title = fill(rng, title_t, program, &[""]);
            let mut body = format!("<p>{}</p>", fill(rng, body_t, program, keywords));
            if rng.random_bool(0.6) {
                let code_t = *CODE.choose(rng).unwrap();
                let code = fill(rng, code_t, program, &[""]);
                body.push_str(&format!("\n<pre><code>{code}</code></pre>"));
            }
            id += rng.random_range(1..5);
            posts.push(Post {
                id,
                date: timestamp(rng, program.start, month),
                title,
                body,
                tags: format!("<{}><r>", program.name),
                label,
            });
        }
    }
    posts
}

fn dump_xml(rng: &mut ChaCha8Rng, posts: &[Post]) -> String {
    let mut order: Vec<&Post> = posts.iter().collect();
    order.sort_by_key(|p| p.id);
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<posts>\n");
    for p in order {
        writeln!(
            out,
            "  <row Id=\"{}\" PostTypeId=\"1\" CreationDate=\"{}\" Score=\"{}\" Title=\"{}\" Body=\"{}\" Tags=\"{}\" />",
            p.id,
            p.date,
            rng.random_range(0..10),
            xml_escape(&p.title),
            xml_escape(&p.body),
            xml_escape(&p.tags)
        )
        .unwrap();
        if rng.random_bool(0.3) {
            writeln!(
                out,
                "  <row Id=\"{}\" PostTypeId=\"2\" ParentId=\"{}\" CreationDate=\"{}\" Body=\"{}\" />",
                p.id * 10 + 1,
                p.id,
                p.date,
                xml_escape("<p>Try the development version.</p>")
            )
            .unwrap();
        }
    }
    out.push_str("  <row Id=\"9\" PostTypeId=\"1\" CreationDate=\"2014-05-01T10:00:00.000\" Title=\"unrelated\" Body=\"&lt;p&gt;other tag&lt;/p&gt;\" Tags=\"&lt;python&gt;\" />\n");
    out.push_str("</posts>\n");
    out
}

fn annotations(posts: &[Post]) -> String {
    let mut out = String::from("question_id\tlabel\n");
    for p in posts {
        if let Some(l) = p.label {
            writeln!(out, "{}\t{l}", p.id).unwrap();
        }
    }
    out
}

fn packages(rng: &mut ChaCha8Rng, skip: Option<&str>, n: usize) -> String {
    let mut header = vec![PACKAGE_COLUMN];
    header.extend(FEATURE_NAMES);
    header.extend(COVARIATE_NAMES);
    header.extend(RESPONSE_NAMES);
    let keep: Vec<bool> = header.iter().map(|h| Some(*h) != skip).collect();
    let mut out = String::new();
    let row = |cells: Vec<String>| cells.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(c, _)| c).collect::<Vec<_>>().join(",");
    writeln!(out, "{}", row(header.iter().map(|h| h.to_string()).collect())).unwrap();
    for i in 0..n {
        let features: Vec<f64> = (0..FEATURE_NAMES.len())
            .map(|f| if f == 23 { rng.random_range(0.0..100.0_f64).round() } else { rng.random_range(0..400) as f64 })
            .collect();
        let months = rng.random_range(12..120) as f64;
        let downloads = rng.random_range(500..50_000) as f64;
        let unique = (downloads * rng.random_range(0.3..0.7)).round();
        let problems = (0.02 * features[7] + 0.05 * features[21] + rng.random_range(0.0..6.0)).round();
        let supports = (0.03 * features[7] + 0.04 * features[6] + 0.1 * months + rng.random_range(0.0..10.0)).round();
        let mut cells = vec![format!("pkg{:02}", i + 1)];
        cells.extend(features.iter().map(|v| v.to_string()));
        cells.extend([months, downloads, unique, problems, supports].iter().map(|v| v.to_string()));
        writeln!(out, "{}", row(cells)).unwrap();
    }
    out
}

/// Cumulative problem counts from an independent tracker, one series per
/// program, on the same month grid.
fn reference_series(rng: &mut ChaCha8Rng) -> String {
    let mut out = String::from("program\tcategory\tmonth\tcumulative\n");
    for program in &PROGRAMS {
        let params = GrowthParams { kappa: rng.random_range(60.0..120.0), beta: program.problem_beta * rng.random_range(0.8..1.2), delta: -5.0 };
        let mut running = 0.0_f64;
        for t in 0..MONTHS {
            let y = (evaluate_model(&params, f64::from(t)).unwrap() * rng.random_range(0.95..1.05)).round();
            running = running.max(y);
            writeln!(out, "{}\tproblem_report\t{t}\t{running}", program.name).unwrap();
        }
    }
    out
}

const CONFIG: &str = r#"{
  "seed": 7,
  "paths": {
    "dump": "Posts.xml",
    "annotations": "annotations.tsv",
    "packages": "packages.csv",
    "reference_series": "reference_series.tsv"
  },
  "programs": [
    { "name": "rivulet", "tag": "rivulet" },
    { "name": "quarry", "tag": "quarry" },
    { "name": "mossbank", "tag": "mossbank" }
  ],
  "cooccur": { "window": 15, "min_count": 2 },
  "cooccur_shards": 4,
  "embedding": { "dim": 50, "epochs": 15 },
  "classifier": { "learner": { "kind": "logistic" }, "folds": 10 },
  "stats": { "alpha": 0.05, "subset_k": 5 },
  "growth": {
    "mcmc": { "chains": 20, "iterations": 2000, "burn_in": 500 },
    "train_fraction": 0.5
  }
}
"#;

fn main() -> std::io::Result<()> {
    let out: PathBuf = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini"));
    fs::create_dir_all(&out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20_190_601);
    let posts = make_posts(&mut rng);
    fs::write(out.join("Posts.xml"), dump_xml(&mut rng, &posts))?;
    fs::write(out.join("annotations.tsv"), annotations(&posts))?;
    fs::write(out.join("packages.csv"), packages(&mut rng, None, 10))?;
    fs::write(out.join("packages_missing_column.csv"), packages(&mut rng, Some("R.Files"), 3))?;
    fs::write(out.join("reference_series.tsv"), reference_series(&mut rng))?;
    fs::write(out.join("config.json"), CONFIG)?;
    println!("wrote {} questions to {}", posts.len(), out.display());
    Ok(())
}
