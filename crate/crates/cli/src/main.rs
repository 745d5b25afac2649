use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tlsjudge::capture::{write_pcap, Endian};
use tlsjudge::ml::{C45Params, Dataset, Label, Metrics};
use tlsjudge::pipeline::{
    extract_tls_flows, run_verdict, select_flows, train_model, ModelFile, Models, PcapFile, Phase, Phase1Features,
    PipelineConfig, Session, TrafficSource, TrainOptions, Verdict,
};
use tlsjudge::synth::{self, SynthConfig};
use tlsjudge::validation::{validate, ValidationReport};
use tlsjudge::x509::{decode_chain, CertificateView};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_REJECTED: u8 = 2;
const EXIT_INDETERMINATE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tlsjudge",
    version,
    about = "Judge TLS servers from certificate failures and encrypted-session metadata"
)]
struct Cli {
    /// JSON config: extension registry, recognized critical OIDs, ciphersuite lists.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Phase1,
    Phase2,
}

impl From<PhaseArg> for Phase {
    fn from(p: PhaseArg) -> Self {
        match p {
            PhaseArg::Phase1 => Phase::Phase1,
            PhaseArg::Phase2 => Phase::Phase2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelArg {
    Malicious,
    Benign,
}

impl From<LabelArg> for Label {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Malicious => Label::Malicious,
            LabelArg::Benign => Label::Benign,
        }
    }
}

#[derive(Args)]
struct CertArgs {
    /// PEM bundle (leaf first) or a single DER certificate.
    #[arg(long)]
    cert_chain: PathBuf,
    #[arg(long)]
    hostname: String,
    /// Evaluation time, RFC 3339 (default: now).
    #[arg(long)]
    at: Option<DateTime<Utc>>,
}

#[derive(Subcommand)]
enum Command {
    /// Run traditional validation and report each criterion.
    Validate {
        #[command(flatten)]
        cert: CertArgs,
        #[arg(long)]
        json: bool,
    },
    /// Write feature rows for a certificate (and capture) to a CSV file.
    Featurize {
        phase: PhaseArg,
        #[command(flatten)]
        cert: CertArgs,
        #[arg(long)]
        pcap: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Label written to the rows (default: benign).
        #[arg(long, value_enum)]
        label: Option<LabelArg>,
        /// Append rows to an existing CSV instead of overwriting it.
        #[arg(long)]
        append: bool,
    },
    /// Train a phase model from a feature CSV.
    Train {
        phase: PhaseArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Training fraction; 1 trains on every row.
        #[arg(long, default_value_t = 0.66)]
        split: f64,
        /// Equal-frequency bins for numeric features.
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// Laplace smoothing for the phase-2 network.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2)]
        min_leaf: usize,
        /// Enable pessimistic pruning of the phase-1 tree at this confidence.
        #[arg(long)]
        pruning_cf: Option<f64>,
    },
    /// Two-phase verdict for a site.
    Classify {
        #[command(flatten)]
        cert: CertArgs,
        #[arg(long)]
        pcap: PathBuf,
        #[arg(long)]
        phase1_model: PathBuf,
        #[arg(long)]
        phase2_model: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Score a model on a feature CSV.
    Evaluate {
        phase: PhaseArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Score only the rows held out by this seed's split.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Generate the seeded synthetic corpus.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1000)]
        sessions: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        malicious_fraction: f64,
        /// Also write one pcap per session.
        #[arg(long)]
        pcaps: bool,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            PipelineConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn load_chain(path: &Path) -> Result<Vec<CertificateView>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let chain = decode_chain(&bytes).with_context(|| format!("decoding {}", path.display()))?;
    if chain.is_empty() {
        bail!("{} contains no certificates", path.display());
    }
    for (i, cert) in chain.iter().enumerate() {
        for w in &cert.warnings {
            log::warn!("certificate {i}: {w}");
        }
    }
    Ok(chain)
}

fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ModelFile::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

fn load_dataset(path: &Path, phase: Phase) -> Result<Dataset> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Dataset::read_csv(file, &phase.schema()).with_context(|| format!("reading {}", path.display()))
}

fn report(cert: &CertArgs, config: &PipelineConfig) -> Result<(Vec<CertificateView>, ValidationReport)> {
    let chain = load_chain(&cert.cert_chain)?;
    let at = cert.at.unwrap_or_else(Utc::now);
    let report = validate(&chain, &cert.hostname, at, &config.validation);
    Ok((chain, report))
}

fn print_report(report: &ValidationReport) {
    for r in &report.results {
        println!("{:4} {:20} {}", if r.failed { "FAIL" } else { "ok" }, r.criterion.as_str(), r.detail);
    }
    println!("     {:20} {}", "self_signed", report.self_signed);
}

fn print_metrics(m: &Metrics) {
    let c = m.confusion;
    println!("accuracy  {:.4}", m.accuracy);
    println!("precision {:.4}", m.precision);
    println!("recall    {:.4}", m.recall);
    println!("f1        {:.4}", m.f1);
    println!("confusion tp={} fp={} fn={} tn={}", c.tp, c.fp, c.fn_, c.tn);
}

fn write_rows(out: &Path, header: &[String], rows: &[Vec<String>], label: Label, append: bool) -> Result<()> {
    let exists = out.exists() && fs::metadata(out)?.len() > 0;
    let file = if append { OpenOptions::new().create(true).append(true).open(out) } else { File::create(out) }
        .with_context(|| format!("opening {}", out.display()))?;
    let mut w = BufWriter::new(file);
    let quote =
        |s: &str| if s.contains([',', '"', '\n']) { format!("\"{}\"", s.replace('"', "\"\"")) } else { s.to_string() };
    if !(append && exists) {
        let mut h: Vec<String> = header.iter().map(|s| quote(s)).collect();
        h.push("label".into());
        writeln!(w, "{}", h.join(","))?;
    }
    for row in rows {
        let mut fields: Vec<String> = row.iter().map(|s| quote(s)).collect();
        fields.push(label.to_string());
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Validate { cert, json } => {
            let (_, report) = report(&cert, &config)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print_report(&report);
            }
            Ok(if report.passed() { EXIT_OK } else { EXIT_REJECTED })
        }
        Command::Featurize { phase, cert, pcap, out, label, append } => {
            let label = label.map(Label::from).unwrap_or_else(|| {
                log::warn!("no --label given; rows are labelled benign");
                Label::Benign
            });
            let (_, report) = report(&cert, &config)?;
            let p1 = Phase1Features::from_report(&report);
            let phase: Phase = phase.into();
            let header: Vec<String> = phase.schema().into_iter().map(|a| a.name).collect();
            let rows = match phase {
                Phase::Phase1 => vec![p1.text_values()],
                Phase::Phase2 => {
                    let Some(pcap) = pcap else { bail!("phase2 features need --pcap") };
                    let packets =
                        PcapFile::new(&pcap).read_packets().with_context(|| format!("reading {}", pcap.display()))?;
                    let flows = select_flows(extract_tls_flows(packets, p1, &config), &cert.hostname);
                    if flows.is_empty() {
                        eprintln!("no TLS handshake for {} in {}", cert.hostname, pcap.display());
                        return Ok(EXIT_INDETERMINATE);
                    }
                    flows.iter().map(|f| f.features.text_values()).collect()
                }
            };
            write_rows(&out, &header, &rows, label, append)?;
            eprintln!("wrote {} row(s) to {}", rows.len(), out.display());
            Ok(EXIT_OK)
        }
        Command::Train { phase, data, out, seed, split, bins, alpha, min_leaf, pruning_cf } => {
            let phase: Phase = phase.into();
            let dataset = load_dataset(&data, phase)?;
            let options = TrainOptions { seed, split, bins, alpha, c45: C45Params { min_leaf, pruning_cf } };
            let model = train_model(phase, &dataset, options, Some(&config.registry))?;
            fs::write(&out, model.to_json()).with_context(|| format!("writing {}", out.display()))?;
            let t = &model.training;
            eprintln!("trained {phase} on {} rows ({} held out) -> {}", t.train_rows, t.test_rows, out.display());
            if let Some(m) = &t.test_metrics {
                print_metrics(m);
            }
            Ok(EXIT_OK)
        }
        Command::Classify { cert, pcap, phase1_model, phase2_model, json } => {
            let models = Models::new(load_model(&phase1_model)?, load_model(&phase2_model)?)?;
            let chain = load_chain(&cert.cert_chain)?;
            let session = Session {
                chain: &chain,
                hostname: &cert.hostname,
                at: cert.at.unwrap_or_else(Utc::now),
                server_ip: None,
            };
            let mut traffic = PcapFile::new(&pcap);
            let verdict = run_verdict(&session, &mut traffic, &models, &config, None)?;
            if json {
                println!("{}", verdict.to_json());
            } else {
                print_verdict(&verdict);
            }
            Ok(verdict.decision.exit_code() as u8)
        }
        Command::Evaluate { phase, data, model, seed, json } => {
            let phase: Phase = phase.into();
            let model = load_model(&model)?;
            model.require_phase(phase)?;
            let dataset = load_dataset(&data, phase)?;
            let rows = match seed {
                Some(s) => model.held_out(&dataset, s)?,
                None => dataset,
            };
            let metrics = model.evaluate(&rows)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&metrics)?);
            } else {
                println!("rows      {}", rows.len());
                print_metrics(&metrics);
            }
            Ok(EXIT_OK)
        }
        Command::Synth { out_dir, sessions, seed, malicious_fraction, pcaps } => {
            if !(0.0..=1.0).contains(&malicious_fraction) {
                bail!("--malicious-fraction must be within [0, 1]");
            }
            fs::create_dir_all(&out_dir)?;
            let corpus = synth::generate(&SynthConfig { sessions, seed, malicious_fraction, ..SynthConfig::default() });
            let p1 = synth::phase1_dataset(&corpus)?;
            p1.write_csv(File::create(out_dir.join("phase1.csv"))?)?;
            let p2 = synth::phase2_dataset(&corpus, &config)?;
            p2.write_csv(File::create(out_dir.join("phase2.csv"))?)?;
            if pcaps {
                let dir = out_dir.join("pcaps");
                fs::create_dir_all(&dir)?;
                let mut index = BufWriter::new(File::create(out_dir.join("sessions.csv"))?);
                writeln!(index, "index,label,hostname,pcap")?;
                for s in &corpus {
                    let name = format!("{:05}_{}.pcap", s.index, s.label);
                    write_pcap(BufWriter::new(File::create(dir.join(&name))?), &s.packets, Endian::Little)?;
                    writeln!(index, "{},{},{},pcaps/{name}", s.index, s.label, s.hostname)?;
                }
                index.flush()?;
            }
            eprintln!("wrote {} sessions to {}", corpus.len(), out_dir.display());
            Ok(EXIT_OK)
        }
    }
}

fn print_verdict(v: &Verdict) {
    let decision = serde_json::to_value(v.decision).ok();
    println!("decision   {}", decision.as_ref().and_then(|d| d.as_str()).unwrap_or("unknown"));
    println!("confidence {:.4}", v.confidence);
    print_report(&v.evidence.validation);
    if let Some(p) = &v.evidence.phase1_prediction {
        println!("phase1     {} ({:.4})", p.label, p.confidence);
    }
    for f in &v.evidence.flows {
        println!(
            "phase2     {}:{} -> {}:{} suite 0x{:04x}, {} extension(s): {} ({:.4})",
            f.flow.client_ip,
            f.flow.client_port,
            f.flow.server_ip,
            f.flow.server_port,
            f.tls.selected_ciphersuite,
            f.tls.server_extensions.len(),
            f.prediction.label,
            f.prediction.confidence
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
