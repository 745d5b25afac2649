//! Acceptance suite: one PASS/FAIL line per criterion, each checked against an
//! oracle that does not share code with the library.

// `ensure!` negates its condition so that NaN fails a check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeSet, HashMap};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use tlsjudge::capture::{assemble_flows, compute_flow_features, read_pcap, FlowFeatures};
use tlsjudge::ml::{
    c45_train, conditional_mutual_information, entropy, split_stats, tan_train, Attribute, C45Params, Classifier,
    Dataset, Label, Node,
};
use tlsjudge::pipeline::{train_model, Phase, PipelineConfig, TrainOptions};
use tlsjudge::synth::{self, SynthConfig};
use tlsjudge::tls::{extension_vector, parse_records, parse_server_hello, ExtensionRegistry, EXTENSION_VECTOR_LEN};
use tlsjudge::validation::{hostname, validate, ValidationConfig};
use tlsjudge::x509::decode_chain;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const CERTS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/certs");
const WEATHER: &str = include_str!("fixtures/ml/weather.csv");

fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

// 1. Validation exactness

#[derive(Deserialize)]
struct Manifest {
    scenarios: Vec<Scenario>,
}

#[derive(Deserialize)]
struct Scenario {
    name: String,
    file: String,
    hostname: String,
    now: DateTime<Utc>,
    failing: Vec<String>,
    self_signed: bool,
    #[serde(default)]
    corpus: bool,
}

fn validation_exactness() -> Outcome {
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(format!("{CERTS}/manifest.json")).unwrap()).unwrap();
    let corpus: Vec<&Scenario> = manifest.scenarios.iter().filter(|s| s.corpus).collect();
    ensure!(corpus.len() == 14, "corpus has {} certificates, expected 14", corpus.len());
    let multi = corpus.iter().filter(|s| s.failing.len() > 1).count();
    ensure!(multi == 1, "expected one multi-fault chain, found {multi}");

    let inputs: Vec<Vec<u8>> = corpus.iter().map(|s| std::fs::read(format!("{CERTS}/{}", s.file)).unwrap()).collect();
    let config = ValidationConfig::default();
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for (s, bytes) in corpus.iter().zip(&inputs) {
        let chain = decode_chain(bytes).map_err(|e| format!("{}: {e}", s.name))?;
        let report = validate(&chain, &s.hostname, s.now, &config);
        let got: BTreeSet<String> = report.failing().iter().map(|c| c.as_str().to_string()).collect();
        let want: BTreeSet<String> = s.failing.iter().cloned().collect();
        if got != want || report.self_signed != s.self_signed {
            mismatches.push(format!("{}: got {got:?}/{}, want {want:?}/{}", s.name, report.self_signed, s.self_signed));
        }
    }
    let elapsed = start.elapsed();
    ensure!(mismatches.is_empty(), "{}", mismatches.join("; "));
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("14/14 reports match the construction matrix in {elapsed:?}"))
}

// 2. Wildcard matching vs brute-force expansion

const LABELS: [&str; 6] = ["a", "b", "com", "example", "www", "xn--bcher-kva"];

fn random_case(rng: &mut ChaCha8Rng, s: &str) -> String {
    s.chars().map(|c| if rng.random_bool(0.2) { c.to_ascii_uppercase() } else { c }).collect()
}

/// Every hostname over `LABELS` the pattern stands for. A wildcard is only
/// meaningful as the whole leftmost label of a name with three or more labels.
fn expand(pattern: &str) -> BTreeSet<String> {
    let pattern = pattern.to_ascii_lowercase();
    let labels: Vec<&str> = pattern.split('.').collect();
    let stars = pattern.matches('*').count();
    if stars == 0 {
        return BTreeSet::from([pattern.clone()]);
    }
    if stars > 1 || labels[0] != "*" || labels.len() < 3 {
        return BTreeSet::new();
    }
    LABELS.iter().map(|l| [*l].iter().chain(&labels[1..]).copied().collect::<Vec<_>>().join(".")).collect()
}

fn wildcard_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pattern_labels: Vec<&str> = LABELS.iter().copied().chain(["*", "*", "w*", "*w", "f*o"]).collect();
    let (mut agree, mut positives) = (0, 0);
    let mut disagreements = Vec::new();
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let pattern: Vec<String> = (0..n)
            .map(|_| {
                let label = *pattern_labels.choose(&mut rng).unwrap();
                random_case(&mut rng, label)
            })
            .collect();
        let pattern = pattern.join(".");
        let host = if rng.random_bool(0.5) {
            let m = rng.random_range(1..=4);
            (0..m).map(|_| *LABELS.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(".")
        } else {
            pattern
                .split('.')
                .map(|l| if l.contains('*') { *LABELS.choose(&mut rng).unwrap() } else { l })
                .collect::<Vec<_>>()
                .join(".")
        };
        let host = random_case(&mut rng, &host);
        let want = expand(&pattern).contains(&host.to_ascii_lowercase());
        positives += usize::from(want);
        if hostname::matches(&pattern, &host) == want {
            agree += 1;
        } else if disagreements.len() < 5 {
            disagreements.push(format!("{pattern} vs {host}: oracle {want}"));
        }
    }
    ensure!(agree == 1000, "{agree}/1000 agree; {}", disagreements.join("; "));
    Ok(format!("1000/1000 pairs agree ({positives} matches)"))
}

// 3. C4.5 against a counting oracle

fn h(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / n as f64).map(|p| -p * p.log2()).sum()
}

fn c45_oracle() -> Outcome {
    let mut lines = WEATHER.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    ensure!(rows.len() == 14, "weather fixture has {} rows", rows.len());
    let k = header.len() - 1;
    let class_of = |r: &Vec<&str>| usize::from(r[k] == "benign");

    let mut class = [0usize; 2];
    rows.iter().for_each(|r| class[class_of(r)] += 1);
    let h_class = h(&class);

    let mut ratios = Vec::new();
    let mut oracle_stats = Vec::new();
    for a in 0..k {
        let mut by_value: HashMap<&str, [usize; 2]> = HashMap::new();
        rows.iter().for_each(|r| by_value.entry(r[a]).or_default()[class_of(r)] += 1);
        let cond: f64 = by_value.values().map(|c| (c[0] + c[1]) as f64 / 14.0 * h(c)).sum();
        let sizes: Vec<usize> = by_value.values().map(|c| c[0] + c[1]).collect();
        let gain = h_class - cond;
        let split = h(&sizes);
        ratios.push(gain / split);
        oracle_stats.push((gain, split));
    }
    let mean_gain = oracle_stats.iter().map(|s| s.0).sum::<f64>() / k as f64;
    let best = (0..k)
        .filter(|&a| oracle_stats[a].0 >= mean_gain)
        .fold(None, |b: Option<usize>, a| match b {
            Some(b) if ratios[b] >= ratios[a] => Some(b),
            _ => Some(a),
        })
        .unwrap();
    let plain_argmax = (0..k).fold(0, |b, a| if ratios[a] > ratios[b] { a } else { b });
    ensure!(
        plain_argmax == best,
        "gain-ratio argmax {} differs from the mean-gain filtered pick {}",
        header[plain_argmax],
        header[best]
    );

    let template: Vec<Attribute> = header[..k].iter().map(|n| Attribute::nominal(*n, &[])).collect();
    let ds = Dataset::read_csv(WEATHER.as_bytes(), &template).map_err(|e| e.to_string())?;
    let data = ds.to_nominal().map_err(|e| e.to_string())?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let lib_h = entropy(&[ds.class_counts().malicious as f64, ds.class_counts().benign as f64]);
    ensure!((lib_h - h_class).abs() < 1e-9, "class entropy {lib_h} vs {h_class}");
    ensure!((h_class - 0.940_285_958_670_631).abs() < 1e-9, "class entropy {h_class}");
    for (a, &(gain, split)) in oracle_stats.iter().enumerate() {
        let s = split_stats(&data, &all, a);
        ensure!((s.gain - gain).abs() < 1e-9, "{}: gain {} vs {gain}", header[a], s.gain);
        ensure!((s.split_info - split).abs() < 1e-9, "{}: split info {} vs {split}", header[a], s.split_info);
    }

    let model = c45_train(&ds, C45Params::default()).map_err(|e| e.to_string())?;
    let Node::Split { attribute, .. } = model.root else { return Err("weather root is a leaf".into()) };
    ensure!(attribute == best, "root {} but oracle argmax {}", header[attribute], header[best]);

    let xor_attrs = vec![Attribute::nominal("x1", &["0", "1"]), Attribute::nominal("x2", &["0", "1"])];
    let mut xor = Dataset::new(xor_attrs);
    for _ in 0..4 {
        for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let label = if a != b { Label::Malicious } else { Label::Benign };
            xor.push_text(&[a.to_string(), b.to_string()], label).unwrap();
        }
    }
    let tree = c45_train(&xor, C45Params::default()).map_err(|e| e.to_string())?;
    let xd = xor.to_nominal().unwrap();
    let correct = xd.rows.iter().zip(&xd.labels).filter(|(r, l)| tree.predict(r).unwrap().label == **l).count();
    ensure!(correct == xd.len(), "XOR training accuracy {correct}/{}", xd.len());
    Ok(format!("root {} = oracle argmax, H(class) = {h_class:.12}, XOR accuracy 1.0", header[best]))
}

// 4. Flow statistics from hand-built pcaps

struct HandPacket {
    sec: u32,
    usec: u32,
    from_client: bool,
    flags: u8,
    payload: usize,
}

const CLIENT: ([u8; 4], u16) = ([10, 0, 0, 7], 51_515);
const SERVER: ([u8; 4], u16) = ([203, 0, 113, 9], 443);

fn frame(p: &HandPacket) -> Vec<u8> {
    let ((sip, sport), (dip, dport)) = if p.from_client { (CLIENT, SERVER) } else { (SERVER, CLIENT) };
    let mut f = vec![0x02, 0, 0, 0, 0, 2, 0x02, 0, 0, 0, 0, 1, 0x08, 0x00];
    let total = (20 + 20 + p.payload) as u16;
    f.extend([0x45, 0]);
    f.extend(total.to_be_bytes());
    f.extend([0, 0, 0x40, 0, 64, 6, 0, 0]);
    f.extend(sip);
    f.extend(dip);
    f.extend(sport.to_be_bytes());
    f.extend(dport.to_be_bytes());
    f.extend(1000u32.to_be_bytes());
    f.extend(0u32.to_be_bytes());
    f.extend([0x50, p.flags, 0xff, 0xff, 0, 0, 0, 0]);
    f.extend(std::iter::repeat_n(0xabu8, p.payload));
    f
}

fn pcap_bytes(packets: &[HandPacket], big_endian: bool) -> Vec<u8> {
    let u32b = |v: u32| if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
    let u16b = |v: u16| if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
    let mut out = Vec::new();
    out.extend(u32b(0xa1b2_c3d4));
    out.extend(u16b(2));
    out.extend(u16b(4));
    out.extend(u32b(0));
    out.extend(u32b(0));
    out.extend(u32b(65_535));
    out.extend(u32b(1));
    for p in packets {
        let f = frame(p);
        out.extend(u32b(p.sec));
        out.extend(u32b(p.usec));
        out.extend(u32b(f.len() as u32));
        out.extend(u32b(f.len() as u32));
        out.extend(f);
    }
    out
}

/// Two-pass arithmetic over the packet list, straight from the definitions.
fn expected_features(packets: &[HandPacket]) -> FlowFeatures {
    let ts: Vec<f64> = packets.iter().map(|p| p.sec as f64 + p.usec as f64 / 1e6).collect();
    let lens: Vec<f64> = packets.iter().map(|p| (54 + p.payload) as f64).collect();
    let iats: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    let stats = |xs: &[f64]| -> (f64, f64, f64, f64) {
        if xs.is_empty() {
            return (0.0, 0.0, 0.0, 0.0);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min, max, mean, var.sqrt())
    };
    let (len_min, len_max, len_mean, len_std) = stats(&lens);
    let (iat_min, iat_max, iat_mean, iat_std) = stats(&iats);
    let bytes = |c: bool| packets.iter().filter(|p| p.from_client == c).map(|p| (54 + p.payload) as u64).sum();
    let count = |c: bool| packets.iter().filter(|p| p.from_client == c).count() as u64;
    FlowFeatures {
        in_bytes: bytes(false),
        out_bytes: bytes(true),
        in_packets: count(false),
        out_packets: count(true),
        src_port: CLIENT.1,
        dst_port: SERVER.1,
        duration_s: ts[ts.len() - 1] - ts[0],
        len_min,
        len_max,
        len_mean,
        len_std,
        iat_min,
        iat_max,
        iat_mean,
        iat_std,
    }
}

fn hand_flow(rng: &mut ChaCha8Rng, n: usize) -> Vec<HandPacket> {
    let (mut sec, mut usec) = (1_700_000_000 + rng.random_range(0..10_000_000u32), rng.random_range(0..1_000_000u32));
    let with_syn = rng.random_bool(0.5);
    (0..n)
        .map(|i| {
            let from_client = if i == 0 { true } else { rng.random_bool(0.45) };
            let flags = if i == 0 && with_syn { 0x02 } else { 0x18 };
            if i > 0 {
                usec += rng.random_range(0..2_500_000);
                sec += usec / 1_000_000;
                usec %= 1_000_000;
            }
            let payload = if flags == 0x02 { 0 } else { rng.random_range(0..1460) };
            HandPacket { sec, usec, from_client, flags, payload }
        })
        .collect()
}

fn flow_statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..20 {
        let n = if case == 0 { 1 } else { rng.random_range(2..60) };
        let packets = hand_flow(&mut rng, n);
        let bytes = pcap_bytes(&packets, case % 2 == 1);
        let capture = read_pcap(&bytes[..]).map_err(|e| format!("case {case}: {e}"))?;
        let flows = assemble_flows(capture.packets);
        ensure!(flows.len() == 1, "case {case}: {} flows", flows.len());
        let got = compute_flow_features(&flows[0]).map_err(|e| e.to_string())?;
        let want = expected_features(&packets);
        ensure!(
            (got.in_bytes, got.out_bytes, got.in_packets, got.out_packets, got.src_port, got.dst_port)
                == (want.in_bytes, want.out_bytes, want.in_packets, want.out_packets, want.src_port, want.dst_port),
            "case {case}: counts {got:?} vs {want:?}"
        );
        let pairs = [
            ("duration_s", got.duration_s, want.duration_s),
            ("len_min", got.len_min, want.len_min),
            ("len_max", got.len_max, want.len_max),
            ("len_mean", got.len_mean, want.len_mean),
            ("len_std", got.len_std, want.len_std),
            ("iat_min", got.iat_min, want.iat_min),
            ("iat_max", got.iat_max, want.iat_max),
            ("iat_mean", got.iat_mean, want.iat_mean),
            ("iat_std", got.iat_std, want.iat_std),
        ];
        for (name, g, w) in pairs {
            ensure!(close_rel(g, w, 1e-9), "case {case}: {name} {g} vs {w}");
        }
        if n == 1 {
            ensure!(
                [got.duration_s, got.iat_min, got.iat_max, got.iat_mean, got.iat_std] == [0.0; 5],
                "single packet: {got:?}"
            );
        }
    }
    Ok("20/20 captures match to 1e-9 relative; single packet has zero duration and IATs".into())
}

// 5. ServerHello extraction

fn record(content_type: u8, body: &[u8]) -> Vec<u8> {
    let mut r = vec![content_type, 3, 3];
    r.extend((body.len() as u16).to_be_bytes());
    r.extend(body);
    r
}

fn hand_server_hello(suite: u16, extensions: &[u16]) -> Vec<u8> {
    let mut body = vec![3, 3];
    body.extend([0x42; 32]);
    body.push(0);
    body.extend(suite.to_be_bytes());
    body.push(0);
    if !extensions.is_empty() {
        let block: Vec<u8> =
            extensions.iter().flat_map(|id| [id.to_be_bytes().as_slice(), &[0, 1, 0]].concat()).collect();
        body.extend((block.len() as u16).to_be_bytes());
        body.extend(block);
    }
    let mut msg = vec![2, 0, (body.len() >> 8) as u8, body.len() as u8];
    msg.extend(body);
    record(22, &msg)
}

fn tls_extraction() -> Outcome {
    let registry = ExtensionRegistry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for suite in [0x000a, 0x0004, 0x006b, 0x0005] {
        for n_ext in [0usize, 1, 2, 5, 9] {
            let mut exts: Vec<u16> = Vec::new();
            while exts.len() < n_ext {
                let id = if rng.random_bool(0.8) {
                    *registry.ids().choose(&mut rng).unwrap()
                } else {
                    rng.random_range(0x3000..0x4000)
                };
                if !exts.contains(&id) {
                    exts.push(id);
                }
            }
            let s2c = [hand_server_hello(suite, &exts), record(20, &[1])].concat();
            let records = parse_records(&s2c).map_err(|e| e.to_string())?.records;
            let info = parse_server_hello(&records, &[]).map_err(|e| e.to_string())?;
            ensure!(
                info.selected_ciphersuite == suite,
                "suite 0x{:04x} parsed as 0x{:04x}",
                suite,
                info.selected_ciphersuite
            );
            let v = extension_vector(&info, &registry);
            let known = exts.iter().filter(|id| registry.ids().contains(id)).count();
            ensure!(
                v.bits.len() == EXTENSION_VECTOR_LEN && EXTENSION_VECTOR_LEN == 21,
                "vector length {}",
                v.bits.len()
            );
            ensure!(v.popcount() == known, "0x{suite:04x} {exts:04x?}: popcount {} vs {known}", v.popcount());
            checked += 1;
        }
    }
    Ok(format!("{checked} ServerHellos over 4 suites: exact codes, 21-bit vectors, popcounts match"))
}

// 6. TAN structure and posteriors

fn random_dataset(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Dataset {
    let cards: Vec<usize> = (0..k).map(|_| rng.random_range(2..=4)).collect();
    let attrs: Vec<Attribute> = cards
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let names: Vec<String> = (0..c).map(|v| v.to_string()).collect();
            Attribute::nominal(format!("x{i}"), &names.iter().map(String::as_str).collect::<Vec<_>>())
        })
        .collect();
    let mut ds = Dataset::new(attrs);
    for _ in 0..n {
        let label = if rng.random_bool(0.5) { Label::Malicious } else { Label::Benign };
        let mut row = vec![0usize; k];
        for i in 0..k {
            row[i] = if i > 0 && rng.random_bool(0.6) {
                (row[rng.random_range(0..i)] + label.index()) % cards[i]
            } else {
                rng.random_range(0..cards[i])
            };
        }
        ds.push_text(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>(), label).unwrap();
    }
    ds
}

/// I(X_i; X_j | C) in bits from empirical probabilities.
fn cmi_oracle(rows: &[(Vec<usize>, usize)], i: usize, j: usize) -> f64 {
    let n = rows.len() as f64;
    let mut pxyz: HashMap<(usize, usize, usize), f64> = HashMap::new();
    let mut pxz: HashMap<(usize, usize), f64> = HashMap::new();
    let mut pyz: HashMap<(usize, usize), f64> = HashMap::new();
    let mut pz: HashMap<usize, f64> = HashMap::new();
    for (r, c) in rows {
        *pxyz.entry((r[i], r[j], *c)).or_default() += 1.0 / n;
        *pxz.entry((r[i], *c)).or_default() += 1.0 / n;
        *pyz.entry((r[j], *c)).or_default() += 1.0 / n;
        *pz.entry(*c).or_default() += 1.0 / n;
    }
    pxyz.iter().map(|(&(x, y, z), &p)| p * (p * pz[&z] / (pxz[&(x, z)] * pyz[&(y, z)])).log2()).sum()
}

/// Decodes a Prüfer sequence into an edge list.
fn prufer_edges(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    seq.iter().for_each(|&v| degree[v] += 1);
    let mut edges = Vec::new();
    for &v in seq {
        let leaf = (0..n).find(|&u| degree[u] == 1).unwrap();
        edges.push((leaf.min(v), leaf.max(v)));
        degree[leaf] -= 1;
        degree[v] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&u| degree[u] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Maximum total weight over all n^(n-2) labelled spanning trees.
fn brute_force_mst(w: &[Vec<f64>]) -> (f64, Vec<BTreeSet<(usize, usize)>>) {
    let n = w.len();
    let total = n.pow(n as u32 - 2);
    let mut best = f64::NEG_INFINITY;
    let mut trees = Vec::new();
    for code in 0..total {
        let seq: Vec<usize> = (0..n - 2).map(|d| code / n.pow(d as u32) % n).collect();
        let edges = prufer_edges(&seq, n);
        let weight: f64 = edges.iter().map(|&(a, b)| w[a][b]).sum();
        if weight > best + 1e-12 {
            best = weight;
            trees.clear();
        }
        if (weight - best).abs() <= 1e-12 {
            trees.push(edges.into_iter().collect());
        }
    }
    (best, trees)
}

fn tan_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let datasets = 25;
    for d in 0..datasets {
        let n = rng.random_range(40..200);
        let ds = random_dataset(&mut rng, 5, n);
        let data = ds.to_nominal().unwrap();
        let rows: Vec<(Vec<usize>, usize)> =
            data.rows.iter().cloned().zip(data.labels.iter().map(|l| l.index())).collect();
        let w: Vec<Vec<f64>> =
            (0..5).map(|i| (0..5).map(|j| if i == j { 0.0 } else { cmi_oracle(&rows, i, j) }).collect()).collect();
        for (i, j) in (0..5).flat_map(|i| (0..5).map(move |j| (i, j))).filter(|(i, j)| i != j) {
            let lib = conditional_mutual_information(&data, i, j);
            ensure!((lib - w[i][j]).abs() < 1e-9, "dataset {d}: CMI({i},{j}) {lib} vs {}", w[i][j]);
        }
        let model = tan_train(&ds, 1.0).map_err(|e| e.to_string())?;
        let edges: BTreeSet<(usize, usize)> =
            model.parents.iter().enumerate().filter_map(|(i, p)| p.map(|p| (i.min(p), i.max(p)))).collect();
        ensure!(edges.len() == 4, "dataset {d}: {} edges", edges.len());
        let (best, optimal) = brute_force_mst(&w);
        let weight: f64 = edges.iter().map(|&(a, b)| w[a][b]).sum();
        ensure!((weight - best).abs() < 1e-9, "dataset {d}: tree weight {weight} vs optimum {best}");
        ensure!(optimal.contains(&edges), "dataset {d}: {edges:?} is not a maximum spanning tree");
        for row in &data.rows {
            let p = model.predict(row).unwrap().posterior;
            ensure!(
                (p.malicious + p.benign - 1.0).abs() < 1e-9,
                "dataset {d}: posterior sums to {}",
                p.malicious + p.benign
            );
        }
    }

    // Counts: malicious (0,0) (0,0) (0,1) (1,1); benign (1,0) (1,1) (1,1) (0,0) (1,0) (1,1).
    // With alpha = 1 and x2's parent x1, for (0,1):
    //   malicious: 5/12 * 4/6 * 2/5 = 1/9, benign: 7/12 * 2/8 * 1/3 = 7/144, posterior 16/23.
    let attrs = vec![Attribute::nominal("x1", &["0", "1"]), Attribute::nominal("x2", &["0", "1"])];
    let mut ds = Dataset::new(attrs);
    for (a, b, l) in [
        ("0", "0", Label::Malicious),
        ("0", "0", Label::Malicious),
        ("0", "1", Label::Malicious),
        ("1", "1", Label::Malicious),
        ("1", "0", Label::Benign),
        ("1", "1", Label::Benign),
        ("1", "1", Label::Benign),
        ("0", "0", Label::Benign),
        ("1", "0", Label::Benign),
        ("1", "1", Label::Benign),
    ] {
        ds.push_text(&[a, b], l).unwrap();
    }
    let model = tan_train(&ds, 1.0).map_err(|e| e.to_string())?;
    ensure!(model.parents == vec![None, Some(0)], "parents {:?}", model.parents);
    let p = model.predict(&[0, 1]).unwrap();
    ensure!((p.posterior.malicious - 16.0 / 23.0).abs() < 1e-9, "posterior {} vs 16/23", p.posterior.malicious);
    ensure!(p.label == Label::Malicious, "label {}", p.label);
    Ok(format!("{datasets} five-attribute trees are maximum spanning trees; posteriors sum to 1; hand posterior 16/23"))
}

// 7. End-to-end learnability

fn learnability() -> Outcome {
    let start = Instant::now();
    let sessions = synth::generate(&SynthConfig { sessions: 1000, seed: 42, ..SynthConfig::default() });
    let config = PipelineConfig::default();
    let data = synth::phase2_dataset(&sessions, &config).map_err(|e| e.to_string())?;
    let options = TrainOptions { seed: 42, split: 0.66, ..TrainOptions::default() };
    let model = train_model(Phase::Phase2, &data, options, Some(&config.registry)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let metrics = model.training.test_metrics.ok_or("no held-out metrics")?;
    ensure!(model.training.test_rows == 340, "held-out rows {}", model.training.test_rows);
    ensure!(metrics.accuracy >= 0.90, "phase-2 held-out accuracy {:.4}", metrics.accuracy);
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "phase-2 held-out accuracy {:.4} on {} rows in {elapsed:.2?}",
        metrics.accuracy, model.training.test_rows
    ))
}

// 8. Determinism

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = PipelineConfig::default();
    let mut files = Vec::new();
    for run in 0..2 {
        let sessions = synth::generate(&SynthConfig { sessions: 300, seed: 7, ..SynthConfig::default() });
        let p1 = synth::phase1_dataset(&sessions).map_err(|e| e.to_string())?;
        let p2 = synth::phase2_dataset(&sessions, &config).map_err(|e| e.to_string())?;
        let options = TrainOptions { seed: 7, ..TrainOptions::default() };
        for (phase, data, registry) in [(Phase::Phase1, &p1, None), (Phase::Phase2, &p2, Some(&config.registry))] {
            let model = train_model(phase, data, options, registry).map_err(|e| e.to_string())?;
            let path = dir.path().join(format!("{phase}-{run}.json"));
            std::fs::write(&path, model.to_json()).map_err(|e| e.to_string())?;
            files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    ensure!(files[0] == files[2], "phase-1 model files differ");
    ensure!(files[1] == files[3], "phase-2 model files differ");
    Ok(format!("phase-1 ({} bytes) and phase-2 ({} bytes) model files byte-identical", files[0].len(), files[1].len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 8] = [
        ("validation exactness", validation_exactness),
        ("wildcard oracle", wildcard_oracle),
        ("C4.5 oracle", c45_oracle),
        ("flow statistics", flow_statistics),
        ("TLS extraction", tls_extraction),
        ("TAN correctness", tan_correctness),
        ("end-to-end learnability", learnability),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
