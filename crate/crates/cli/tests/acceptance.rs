//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use corpusclean::anomaly::{c_factor, detect, score_from_path_length, DetectorConfig, Matrix};
use corpusclean::corpus_io::{read_documents, write_partition, Routed};
use corpusclean::lang_id::train_lid;
use corpusclean::ngram_lm::{load_arpa, save_arpa, train_lm};
use corpusclean::pipeline::{
    benchmark, clean_corpus, read_feature_rows, score_language, threshold_clean, CleanReport, RunConfig,
    ThresholdRuleSet, DEFAULT_FIT_CAP, DEFAULT_MIN_DOCS,
};
use corpusclean::stats::fit_stats;
use corpusclean::synth::{self, SynthDoc};
use corpusclean::{FeatureConfig, FeatureVector, Label, LidModel, Lexicons, OnError, Resources, FEATURE_COUNT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_corpusclean");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Writes past the test harness's output capture so the lines always show.
fn say(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

/// Models and word lists for the synthetic languages, written to `dir` and
/// loaded back the way the command line loads them.
struct Fixture {
    dir: PathBuf,
}

impl Fixture {
    fn build(dir: &Path) -> Self {
        let models = dir.join("models");
        let stop = dir.join("stopwords");
        let flagged = dir.join("flagged");
        for d in [&models, &stop, &flagged] {
            std::fs::create_dir_all(d).unwrap();
        }
        let lm = train_lm(synth::lm_sentences(20_000, 21), 3, synth::FLUENT_LANG).unwrap();
        save_arpa(&lm, models.join(format!("{}.arpa", synth::FLUENT_LANG))).unwrap();
        train_lid(&synth::lid_samples(300, 11), 3, 0.5).unwrap().save(dir.join("lid.txt")).unwrap();
        let list = |words: HashSet<String>| {
            let mut v: Vec<String> = words.into_iter().collect();
            v.sort();
            v.join("\n") + "\n"
        };
        std::fs::write(stop.join(format!("{}.txt", synth::FLUENT_LANG)), list(synth::stopwords())).unwrap();
        std::fs::write(flagged.join(format!("{}.txt", synth::FLUENT_LANG)), list(synth::flagged_words())).unwrap();
        Fixture { dir: dir.to_path_buf() }
    }

    fn resources(&self) -> Resources {
        let mut lex = Lexicons::new();
        lex.load_stopwords_dir(self.dir.join("stopwords")).unwrap();
        lex.load_flagged_dir(self.dir.join("flagged")).unwrap();
        let mut r = Resources::new(lex);
        r.load_models_dir(self.dir.join("models")).unwrap();
        r.lid = Some(LidModel::load(self.dir.join("lid.txt")).unwrap());
        r
    }

    fn flags(&self) -> Vec<String> {
        let p = |s: &str| self.dir.join(s).display().to_string();
        vec![
            "--models-dir".into(),
            p("models"),
            "--lid-model".into(),
            p("lid.txt"),
            "--stopwords-dir".into(),
            p("stopwords"),
            "--flagged-dir".into(),
            p("flagged"),
        ]
    }
}

fn cli(args: &[String]) -> std::process::Output {
    let out = Command::new(BIN).args(args).env_remove("DCAD_CONFIG").output().unwrap();
    assert!(
        out.status.success(),
        "corpusclean {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn args(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).map(|t| t.lines().map(str::to_owned).collect()).unwrap_or_default()
}

fn ids_in(path: &Path) -> Vec<String> {
    lines(path)
        .iter()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["id"].as_str().unwrap().to_string())
        .collect()
}

fn output_files(out: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut m = BTreeMap::new();
    for sub in ["keep", "remove"] {
        let Ok(rd) = std::fs::read_dir(out.join(sub)) else { continue };
        for e in rd {
            let p = e.unwrap().path();
            m.insert(format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap());
        }
    }
    m.insert("report.tsv".into(), std::fs::read(out.join("report.tsv")).unwrap());
    m
}

fn normal(rng: &mut impl Rng) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn removal_rate(fx: &Fixture, dir: &Path) -> Outcome {
    let input = dir.join("homogeneous.jsonl");
    synth::write_jsonl(&synth::homogeneous_corpus(10_000, 1), &input).unwrap();
    let mut run = RunConfig::new(dir.join("c1"));
    run.workers = Some(1);
    let res = fx.resources();
    let t = Instant::now();
    let report = clean_corpus(&[input], &res, &FeatureConfig::default(), &DetectorConfig::default(), &run).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let frac = report.removal_fraction();
    outcome(
        (frac - 0.0769).abs() <= 0.001 && secs <= 60.0,
        format!("removed {:.4} of 10000 docs in {secs:.2} s (single thread)", frac),
    )
}

fn harmonic_arithmetic() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut h = 0.0;
    for n in 0..=10_000usize {
        if n >= 2 {
            h += 1.0 / (n - 1) as f64;
        }
        let want = match n {
            0 | 1 => 0.0,
            2 => 1.0,
            _ => 2.0 * h - 2.0 * (n - 1) as f64 / n as f64,
        };
        worst = worst.max((c_factor(n) - want).abs());
    }
    let half = [2usize, 256, 10_000].iter().all(|&p| score_from_path_length(c_factor(p), c_factor(p)) == 0.5);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst < 1e-12 && half && secs < 1.0,
        format!("max |c(n) - explicit| = {worst:.1e}, score at h = c(psi) is 0.5: {half}, {secs:.3} s"),
    )
}

fn standardized_moments() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scales = [1.0, 10.0, 0.01, 1e3, 5.0, 0.5, 100.0, 2.0];
    let rows: Vec<[f64; 8]> = (0..50_000)
        .map(|_| std::array::from_fn(|j| scales[j] * normal(&mut rng) + j as f64 * 7.0))
        .collect();
    let stats = fit_stats(&rows).unwrap();
    let (mut mean_err, mut sd_err): (f64, f64) = (0.0, 0.0);
    for j in 0..8 {
        let z: Vec<f64> = rows.iter().map(|r| stats.standardize(r)[j]).collect();
        let m = z.iter().sum::<f64>() / z.len() as f64;
        let sd = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / z.len() as f64).sqrt();
        mean_err = mean_err.max(m.abs());
        sd_err = sd_err.max((sd - 1.0).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        mean_err <= 1e-9 && sd_err <= 1e-9 && secs < 5.0,
        format!("max |mean| = {mean_err:.1e}, max |sd - 1| = {sd_err:.1e}, {secs:.2} s"),
    )
}

fn planted_outliers() -> Outcome {
    let t = Instant::now();
    let mut recalls = Vec::new();
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut rows: Vec<Vec<f64>> = (0..2000).map(|_| (0..8).map(|_| normal(&mut rng)).collect()).collect();
        let planted = rand::seq::index::sample(&mut rng, 2000, 100).into_vec();
        for &i in &planted {
            let a = rng.random_range(0..8);
            let b = (a + rng.random_range(1..8)) % 8;
            for d in [a, b] {
                rows[i][d] = if rng.random::<bool>() { 8.0 } else { -8.0 };
            }
        }
        let cfg = DetectorConfig { contamination: 0.05, seed, ..DetectorConfig::default() };
        let d = detect(&Matrix::from_rows(&rows), &cfg).unwrap();
        let hit = planted.iter().filter(|&&i| d.verdicts[i].label == Label::Remove).count();
        recalls.push(hit as f64 / planted.len() as f64);
    }
    let secs = t.elapsed().as_secs_f64();
    let min = recalls.iter().cloned().fold(1.0, f64::min);
    outcome(min >= 0.9 && secs < 10.0, format!("recall per seed {recalls:?}, {secs:.2} s"))
}

fn lof_brute(x: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = x.len();
    let d = |a: usize, b: usize| x[a].iter().zip(&x[b]).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let knn: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut o: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            o.sort_by(|&a, &b| d(i, a).partial_cmp(&d(i, b)).unwrap());
            o.truncate(k);
            o
        })
        .collect();
    let kd: Vec<f64> = (0..n).map(|i| d(i, knn[i][k - 1])).collect();
    let lrd: Vec<f64> = (0..n)
        .map(|i| 1.0 / (knn[i].iter().map(|&o| d(i, o).max(kd[o])).sum::<f64>() / k as f64 + 1e-10))
        .collect();
    (0..n).map(|i| knn[i].iter().map(|&o| lrd[o]).sum::<f64>() / k as f64 / lrd[i]).collect()
}

fn tree_walk(nodes: &[corpusclean::anomaly::Node<f64>], at: usize, x: &[f64]) -> f64 {
    use corpusclean::anomaly::Node;
    match &nodes[at] {
        Node::External { size } => {
            let s = *size;
            if s <= 1 {
                0.0
            } else if s == 2 {
                1.0
            } else {
                2.0 * (1..s).map(|k| 1.0 / k as f64).sum::<f64>() - 2.0 * (s - 1) as f64 / s as f64
            }
        }
        Node::Internal { feature, split, left, right } => {
            1.0 + tree_walk(nodes, if x[*feature] < *split { *left } else { *right }, x)
        }
    }
}

fn detector_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut lof_err: f64 = 0.0;
    for (n, k) in [(100usize, 20usize), (50, 5), (80, 10)] {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| normal(&mut rng)).collect()).collect();
        let cfg = DetectorConfig { algorithm: "lof".parse().unwrap(), lof_k: k, ..DetectorConfig::default() };
        let d = detect(&Matrix::from_rows(&rows), &cfg).unwrap();
        for (v, w) in d.verdicts.iter().zip(lof_brute(&rows, k)) {
            lof_err = lof_err.max((v.score - w).abs());
        }
    }
    let rows: Vec<Vec<f64>> = (0..500).map(|_| (0..8).map(|_| normal(&mut rng)).collect()).collect();
    let forest = corpusclean::anomaly::fit_iforest(&Matrix::from_rows(&rows), 200, 64, 17).unwrap();
    let mut path_err: f64 = 0.0;
    for tree in forest.trees() {
        for r in rows.iter().take(50) {
            let got = corpusclean::anomaly::path_length(r, tree);
            path_err = path_err.max((got - tree_walk(tree.nodes(), 0, r)).abs());
        }
    }
    outcome(
        lof_err <= 1e-9 && path_err <= 1e-12,
        format!("LOF max deviation {lof_err:.1e}, path length max deviation over 200 trees {path_err:.1e}"),
    )
}

fn noisy_corpus(dir: &Path) -> (PathBuf, Vec<SynthDoc>) {
    let docs = synth::mixed_corpus(1000, 100, 6);
    let path = dir.join("mixed.jsonl");
    synth::write_jsonl(&docs, &path).unwrap();
    (path, docs)
}

fn noise_recall(out: &Path, docs: &[SynthDoc]) -> f64 {
    let noise: HashSet<&str> = docs.iter().filter(|d| d.noise.is_some()).map(|d| d.doc.id.as_str()).collect();
    let mut hit = 0;
    if let Ok(rd) = std::fs::read_dir(out.join("remove")) {
        for e in rd {
            hit += ids_in(&e.unwrap().path()).iter().filter(|id| noise.contains(id.as_str())).count();
        }
    }
    hit as f64 / noise.len() as f64
}

fn noise_separation(fx: &Fixture, dir: &Path) -> Outcome {
    let (input, docs) = noisy_corpus(dir);
    let res = fx.resources();
    let t = Instant::now();
    let det = DetectorConfig { contamination: 0.09, ..DetectorConfig::default() };
    let a_out = dir.join("c6-anomaly");
    clean_corpus(&[input.clone()], &res, &FeatureConfig::default(), &det, &RunConfig::new(&a_out)).unwrap();
    let t_out = dir.join("c6-threshold");
    threshold_clean(&[input], &res, &FeatureConfig::default(), &ThresholdRuleSet::loose(), &RunConfig::new(&t_out))
        .unwrap();
    let secs = t.elapsed().as_secs_f64();
    let (a, b) = (noise_recall(&a_out, &docs), noise_recall(&t_out, &docs));
    outcome(
        a >= 0.8 && a > b && secs < 30.0,
        format!("anomaly recall {a:.2}, threshold recall {b:.2}, {secs:.2} s"),
    )
}

fn labels_by_id(out: &Path) -> HashMap<String, Label> {
    let mut m = HashMap::new();
    for sub in ["keep", "remove"] {
        let Ok(rd) = std::fs::read_dir(out.join(sub)) else { continue };
        for e in rd {
            for l in lines(&e.unwrap().path()) {
                let v: serde_json::Value = serde_json::from_str(&l).unwrap();
                let label = Label::from_i64(v["dcad_label"].as_i64().unwrap()).unwrap();
                m.insert(v["id"].as_str().unwrap().to_string(), label);
            }
        }
    }
    m
}

fn ablation(fx: &Fixture, dir: &Path) -> Outcome {
    let (input, _) = noisy_corpus(dir);
    let input_s = input.display().to_string();
    let feats = dir.join("c7-features.jsonl");
    let mut a = args(&["features", "-i", &input_s, "--output", &feats.display().to_string()]);
    a.extend(fx.flags());
    cli(&a);
    let rows = read_feature_rows(&feats).unwrap();
    let mut by_lang: BTreeMap<&str, Vec<&corpusclean::pipeline::FeatureRow>> = BTreeMap::new();
    for r in &rows {
        by_lang.entry(&r.lang).or_default().push(r);
    }
    let mut mismatched = Vec::new();
    for i in 1..=FEATURE_COUNT {
        let out = dir.join(format!("c7-ablate-{i}"));
        let mut a = args(&["clean", "-i", &input_s, "-o", &out.display().to_string(), "--annotate"]);
        a.extend(["--ablate-feature".to_string(), i.to_string()]);
        a.extend(fx.flags());
        cli(&a);
        let got = labels_by_id(&out);
        let mut diff = 0;
        for rows in by_lang.values() {
            let want: Vec<Label> = if rows.len() < DEFAULT_MIN_DOCS {
                vec![Label::Keep; rows.len()]
            } else {
                let projected: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|r| (0..FEATURE_COUNT).filter(|&j| j != i - 1).map(|j| r.features[j]).collect())
                    .collect();
                let stats = fit_stats(&projected).unwrap();
                score_language(&Matrix::from_rows(&projected), &stats, &DetectorConfig::default(), DEFAULT_FIT_CAP)
                    .unwrap()
                    .labels
            };
            diff += rows.iter().zip(&want).filter(|(r, l)| got.get(&r.id) != Some(l)).count();
        }
        if diff > 0 {
            mismatched.push((i, diff));
        }
    }
    outcome(
        mismatched.is_empty(),
        format!("features 1..8 ablated over {} docs, label mismatches {mismatched:?}", rows.len()),
    )
}

fn round_trips(fx: &Fixture, dir: &Path) -> Outcome {
    let lm = fx.dir.join("models").join(format!("{}.arpa", synth::FLUENT_LANG));
    let again = dir.join("again.arpa");
    save_arpa(&load_arpa(&lm).unwrap(), &again).unwrap();
    let arpa = std::fs::read(&lm).unwrap() == std::fs::read(&again).unwrap();

    let (input, _) = noisy_corpus(dir);
    let routed: Vec<Routed> = read_documents(&input, OnError::Abort)
        .unwrap()
        .map(|r| Routed { record: r.unwrap(), label: Label::Keep, features: FeatureVector::default(), score: 0.0 })
        .collect();
    let (k, r) = (dir.join("c9-keep.jsonl"), dir.join("c9-remove.jsonl"));
    write_partition(routed, &k, &r, false).unwrap();
    let identity = std::fs::read(&k).unwrap() == std::fs::read(&input).unwrap();

    let out = dir.join("c9-clean");
    let mut a = args(&["clean", "-i", &input.display().to_string(), "-o", &out.display().to_string()]);
    a.extend(fx.flags());
    cli(&a);
    let original = lines(&input);
    let position: HashMap<&str, usize> = original.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut routed_lines = Vec::new();
    let mut ordered = true;
    for sub in ["keep", "remove"] {
        for e in std::fs::read_dir(out.join(sub)).unwrap() {
            let ls = lines(&e.unwrap().path());
            let pos: Vec<Option<&usize>> = ls.iter().map(|l| position.get(l.as_str())).collect();
            ordered &= pos.iter().all(Option::is_some) && pos.windows(2).all(|w| w[0] < w[1]);
            routed_lines.extend(ls);
        }
    }
    let mut sorted_original = original.clone();
    sorted_original.sort();
    routed_lines.sort();
    let pass_through = ordered && routed_lines == sorted_original;

    let report = CleanReport::parse_tsv(&std::fs::read_to_string(out.join("report.tsv")).unwrap()).unwrap();
    let total = report.total();
    let sum = |f: &dyn Fn(&corpusclean::pipeline::LanguageReport) -> [u64; 6]| {
        report.languages.values().map(f).fold([0u64; 6], |mut acc, v| {
            acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            acc
        })
    };
    let cells = |l: &corpusclean::pipeline::LanguageReport| {
        [l.docs.keep, l.docs.remove, l.tokens.keep, l.tokens.remove, l.bytes.keep, l.bytes.remove]
    };
    let additive = sum(&cells) == cells(&total) && total.docs.total() == original.len() as u64;
    outcome(
        arpa && identity && pass_through && additive,
        format!("ARPA identical: {arpa}, partition identity: {identity}, clean pass-through: {pass_through}, TOTAL additive: {additive}"),
    )
}

fn determinism(fx: &Fixture, dir: &Path) -> Outcome {
    let (input, _) = noisy_corpus(dir);
    let mut outs = Vec::new();
    for run in ["c10-a", "c10-b"] {
        let out = dir.join(run);
        let mut a = args(&["clean", "-i", &input.display().to_string(), "-o", &out.display().to_string()]);
        a.extend(fx.flags());
        cli(&a);
        outs.push(output_files(&out));
    }
    outcome(outs[0] == outs[1], format!("{} output files compared byte for byte", outs[0].len()))
}

fn cost_overhead(fx: &Fixture, dir: &Path) -> Outcome {
    let input = dir.join("bench.jsonl");
    synth::write_jsonl(&synth::mixed_corpus(95_000, 5_000, 8), &input).unwrap();
    let res = fx.resources();
    let run = RunConfig::new(dir.join("c8"));
    let b = benchmark(
        &[input],
        &res,
        &FeatureConfig::default(),
        &DetectorConfig::default(),
        &ThresholdRuleSet::loose(),
        &run,
    )
    .unwrap();
    let ratio = b.overhead_ratio();
    outcome(
        ratio <= 2.0,
        format!(
            "anomaly {:.2} s vs threshold {:.2} s on 100000 docs, ratio {ratio:.3}",
            b.anomaly.seconds, b.threshold.seconds
        ),
    )
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let fx = Fixture::build(&dir.join("resources"));
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("removal rate on a homogeneous corpus", Box::new(|| removal_rate(&fx, dir))),
        ("path-length normalizer arithmetic", Box::new(harmonic_arithmetic)),
        ("moments after standardization", Box::new(standardized_moments)),
        ("planted outlier recovery", Box::new(planted_outliers)),
        ("detector oracles", Box::new(detector_oracles)),
        ("noise separation versus thresholds", Box::new(|| noise_separation(&fx, dir))),
        ("ablation equivalence", Box::new(|| ablation(&fx, dir))),
        ("cost overhead bound", Box::new(|| cost_overhead(&fx, dir))),
        ("format round trips", Box::new(|| round_trips(&fx, dir))),
        ("determinism", Box::new(|| determinism(&fx, dir))),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        say(&format!("criterion {:>2} {tag}: {name} ({})", i + 1, o.detail));
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
