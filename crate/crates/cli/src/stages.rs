//! Command implementations. Every stage writes deterministic artifact
//! names under the output directory plus a canonical dump of the
//! effective configuration, so reruns overwrite cleanly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use phonekit::config::ConfigMap;
use phonekit::container::{self, sections, ModelContainer};
use phonekit::corpus::{
    self, PhoneInventory, PhoneSequence, Transcript,
};
use phonekit::dnn::HybridModel;
use phonekit::error::Error;
use phonekit::eval::phone_error_rate;
use phonekit::feat::{FeatureMatrix, StreamTag};
use phonekit::harness::{
    align_corpus, alignment_to_segments, build_training_lattice, gmm_training_recipe,
    run_cross_validation, train_hybrid, ExperimentConfig, TrainedSystem,
};
use phonekit::hmm::{
    init_from_alignments, init_from_timed_transcriptions, read_alignment, write_alignment,
    Alignment, FrameSegment,
};
use phonekit::lattice::{compile_decode_graph, train_biphone_lm, viterbi_decode, BiphoneLm};
use phonekit::neural::{assemble_neural_features, fit_neural_model, NeuralConfig, NeuralModel};
use phonekit::synth::{generate_corpus, GeneratorSpec};
use phonekit::Result as ToolResult;

use crate::{Cli, CliError, Command, Stream};

type CliResult = std::result::Result<(), CliError>;

pub fn run(cli: Cli) -> CliResult {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be >= 1".into()));
        }
        // Ignore failure: the global pool may already exist in tests.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }

    let config = effective_config(&cli)?;
    fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    let _lock = OutDirLock::acquire(&cli.out)?;

    match &cli.command {
        Command::Features {
            stream,
            inputs,
            fit,
            neural_model,
            dump_envelopes,
        } => cmd_features(
            &cli,
            &config,
            *stream,
            inputs,
            *fit,
            neural_model.as_deref(),
            *dump_envelopes,
        ),
        Command::TrainAsr { data, list } => cmd_train_asr(&cli, &config, data, list.as_deref()),
        Command::Align {
            model,
            data,
            list,
            stream,
        } => cmd_align(&cli, model, data, list.as_deref(), *stream),
        Command::TrainNsr {
            data,
            list,
            alignments,
        } => cmd_train_nsr(&cli, &config, data, list.as_deref(), alignments),
        Command::Decode {
            model,
            data,
            list,
            stream,
        } => cmd_decode(&cli, &config, model, data, list.as_deref(), *stream),
        Command::Evaluate {
            cv,
            refs,
            hyps,
            list,
        } => cmd_evaluate(&cli, &config, *cv, refs.as_deref(), hyps.as_deref(), list.as_deref()),
        Command::Synth { n } => cmd_synth(&cli, &config, *n),
    }
}

/// Config file < --set overrides < --seed, in increasing precedence.
fn effective_config(cli: &Cli) -> std::result::Result<ConfigMap, CliError> {
    let mut config = match &cli.config {
        Some(path) => ConfigMap::read(path)?,
        None => ConfigMap::new(),
    };
    for pair in &cli.overrides {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set needs key=value, got '{pair}'")))?;
        config.set(k.trim(), v.trim());
    }
    if let Some(seed) = cli.seed {
        config.set("seed", seed);
    }
    Ok(config)
}

/// Advisory lock: no two commands should write one output directory at
/// the same time. Removed on drop; a stale file must be deleted by hand.
struct OutDirLock {
    path: PathBuf,
}

impl OutDirLock {
    fn acquire(out: &Path) -> std::result::Result<OutDirLock, CliError> {
        let path = out.join(".phonekit.lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutDirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CliError::Tool(Error::InvalidParam(format!(
                    "output directory is locked by {} (remove the file if stale)",
                    path.display()
                ))))
            }
            Err(e) => Err(CliError::Tool(Error::io(&path, e))),
        }
    }
}

impl Drop for OutDirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write_stage_config(out: &Path, stage: &str, config: &ConfigMap) -> ToolResult<()> {
    config.write(out.join(format!("{stage}.config")))
}

/// Structured metrics next to each trained model.
fn write_train_log(
    out: &Path,
    stage: &str,
    items: &[DataItem],
    system: &TrainedSystem,
) -> ToolResult<()> {
    let frames: usize = items.iter().map(|i| i.feats.rows()).sum();
    let mut log = String::new();
    log.push_str(&format!("utterances {}\n", items.len()));
    log.push_str(&format!("frames {frames}\n"));
    log.push_str(&format!("dim {}\n", system.gmm.dim()));
    log.push_str(&format!("states {}\n", system.gmm.n_states()));
    log.push_str(&format!(
        "mixtures {}\n",
        system.gmm.models()[0].states[0].components.len()
    ));
    if let Some(h) = &system.hybrid {
        log.push_str(&format!("dnn_layers {:?}\n", h.dnn.layer_sizes));
        for (i, loss) in h.dnn.epoch_losses.iter().enumerate() {
            log.push_str(&format!("dnn_epoch {} loss {loss:.6}\n", i + 1));
        }
    }
    let path = out.join(format!("{stage}.log"));
    fs::write(&path, log).map_err(|e| Error::io(&path, e))
}

fn stream_suffix(stream: Stream) -> &'static str {
    match stream {
        Stream::Acoustic => "acoustic",
        Stream::Neural => "neural",
    }
}

fn stream_tag(stream: Stream) -> StreamTag {
    match stream {
        Stream::Acoustic => StreamTag::Acoustic,
        Stream::Neural => StreamTag::Neural,
    }
}

// ── Data directory conventions ──────────────────────────────────────────

struct DataItem {
    id: String,
    feats: FeatureMatrix,
    transcript: PhoneSequence,
    truth_alignment: Option<Alignment>,
}

fn read_id_list(path: &Path) -> ToolResult<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

fn discover_ids(data: &Path) -> ToolResult<Vec<String>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(data).map_err(|e| Error::io(data, e))? {
        let entry = entry.map_err(|e| Error::io(data, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(".txt") {
            ids.push(stem.to_string());
        }
    }
    ids.sort();
    Ok(ids)
}

fn load_data(
    data: &Path,
    list: Option<&Path>,
    stream: Stream,
    inv: &PhoneInventory,
) -> ToolResult<Vec<DataItem>> {
    let ids = match list {
        Some(p) => read_id_list(p)?,
        None => discover_ids(data)?,
    };
    if ids.is_empty() {
        return Err(Error::InvalidParam(format!(
            "no utterances found in {}",
            data.display()
        )));
    }
    // Validate every referenced file before doing any work.
    let suffix = stream_suffix(stream);
    let mut missing = Vec::new();
    for id in &ids {
        for path in [
            data.join(format!("{id}.{suffix}.ftr")),
            data.join(format!("{id}.txt")),
        ] {
            if !path.exists() {
                missing.push(path.display().to_string());
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::InvalidParam(format!(
            "missing inputs: {}",
            missing.join(", ")
        )));
    }

    let mut items = Vec::with_capacity(ids.len());
    for id in ids {
        let feats = FeatureMatrix::read_ftr(
            data.join(format!("{id}.{suffix}.ftr")),
            stream_tag(stream),
        )?;
        let transcript =
            match corpus::read_transcript(data.join(format!("{id}.txt")), inv)? {
                Transcript::Untimed(seq) => seq,
                Transcript::Timed(segs) => Transcript::Timed(segs).phone_sequence(),
            };
        let ali_path = data.join(format!("{id}.{suffix}.ali"));
        let truth_alignment = if ali_path.exists() {
            Some(read_alignment(&ali_path, inv)?)
        } else {
            None
        };
        items.push(DataItem {
            id,
            feats,
            transcript,
            truth_alignment,
        });
    }
    Ok(items)
}

// ── Model container composition ─────────────────────────────────────────

fn save_system(
    path: &Path,
    system: &TrainedSystem,
    lm: &BiphoneLm,
    meta: BTreeMap<String, String>,
) -> ToolResult<()> {
    let mut c = ModelContainer::new();
    c.insert(sections::GMM, container::encode_gmm(&system.gmm));
    c.insert(sections::LM, container::encode_lm(lm));
    if let Some(h) = &system.hybrid {
        c.insert(sections::LDA, container::encode_lda(&h.lda));
        c.insert(sections::NORM, container::encode_norm(&h.norm));
        c.insert(sections::DNN, container::encode_dnn(&h.dnn));
        c.insert(sections::PRIORS, container::encode_priors(&h.dnn.priors));
    }
    c.insert(sections::META, container::encode_meta(&meta));
    c.write(path)
}

fn load_system(path: &Path) -> ToolResult<(TrainedSystem, BiphoneLm, BTreeMap<String, String>)> {
    let c = ModelContainer::read(path)?;
    let gmm = container::decode_gmm(c.get(sections::GMM)?)?;
    let lm = container::decode_lm(c.get(sections::LM)?)?;
    let meta = if c.has(sections::META) {
        container::decode_meta(c.get(sections::META)?)?
    } else {
        BTreeMap::new()
    };
    let hybrid = if c.has(sections::DNN) {
        let priors = container::decode_priors(c.get(sections::PRIORS)?)?;
        let dnn = container::decode_dnn(c.get(sections::DNN)?, priors)?;
        let splice_context: usize = meta
            .get("splice_context")
            .and_then(|s| s.parse().ok())
            .unwrap_or(8);
        Some(HybridModel {
            splice_context,
            lda: container::decode_lda(c.get(sections::LDA)?)?,
            norm: container::decode_norm(c.get(sections::NORM)?)?,
            dnn,
        })
    } else {
        None
    };
    Ok((TrainedSystem { gmm, hybrid }, lm, meta))
}

// ── Commands ────────────────────────────────────────────────────────────

fn cmd_features(
    cli: &Cli,
    config: &ConfigMap,
    stream: Stream,
    inputs: &[PathBuf],
    fit: bool,
    neural_model: Option<&Path>,
    dump_envelopes: bool,
) -> CliResult {
    let out_dir = cli.out.join("features");
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    // Enumerate missing inputs before any work starts.
    let missing: Vec<String> = inputs
        .iter()
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Tool(Error::InvalidParam(format!(
            "missing inputs: {}",
            missing.join(", ")
        ))));
    }

    match stream {
        Stream::Acoustic => {
            let mut mfcc = phonekit::acoustic::MfccConfig::default();
            mfcc.n_mel_filters = config.get_usize("mfcc.n_mel_filters", mfcc.n_mel_filters)?;
            mfcc.use_c0 = config.get_bool("mfcc.use_c0", mfcc.use_c0)?;
            for input in inputs {
                let wave = corpus::load_waveform(input)?;
                let statics = phonekit::acoustic::compute_mfcc(&wave, &mfcc)?;
                let full = phonekit::feat::append_deltas(&statics);
                let dest = out_dir.join(format!("{}.acoustic.ftr", wave.id()));
                full.write_ftr(&dest)?;
                println!("features {} -> {} ({} x {})", input.display(), dest.display(), full.rows(), full.dim());
            }
        }
        Stream::Neural => {
            let ncfg = neural_config_from(config)?;
            let recordings: Vec<corpus::NeuralRecording> = inputs
                .iter()
                .map(|p| {
                    let rec = corpus::load_neural_recording(p)?;
                    phonekit::neural::reject_channels(&rec, ncfg.reject_z)
                })
                .collect::<ToolResult<_>>()?;
            let model: NeuralModel = match (fit, neural_model) {
                (true, _) => {
                    let seed = config.get_u64("seed", 1)?;
                    let model = fit_neural_model(&recordings, &ncfg, seed)?;
                    let mut c = ModelContainer::new();
                    c.insert(sections::BASIS, container::encode_basis(&model.basis));
                    c.insert(sections::NMF, container::encode_nmf(&model.nmf));
                    let mut meta = BTreeMap::new();
                    meta.insert("stream".into(), "neural".into());
                    c.insert(sections::META, container::encode_meta(&meta));
                    let dest = out_dir.join("neural_frontend.mdl");
                    c.write(&dest)?;
                    println!("fitted neural front-end -> {}", dest.display());
                    model
                }
                (false, Some(path)) => {
                    let c = ModelContainer::read(path)?;
                    NeuralModel {
                        basis: container::decode_basis(c.get(sections::BASIS)?)?,
                        nmf: container::decode_nmf(c.get(sections::NMF)?)?,
                    }
                }
                (false, None) => {
                    return Err(CliError::Usage(
                        "neural features need --fit or --neural-model <path>".into(),
                    ))
                }
            };
            for (input, rec) in inputs.iter().zip(&recordings) {
                if dump_envelopes {
                    let stack = phonekit::neural::envelope_stack(rec, &ncfg)?;
                    let env = FeatureMatrix::new(
                        stack.transpose(),
                        1.0 / ncfg.out_rate_hz,
                        stream_tag(stream),
                    )?;
                    env.write_ftr(out_dir.join(format!("{}.envelopes.ftr", rec.id())))?;
                }
                let feats = assemble_neural_features(rec, &model, &ncfg)?;
                let dest = out_dir.join(format!("{}.neural.ftr", rec.id()));
                feats.write_ftr(&dest)?;
                println!("features {} -> {} ({} x {})", input.display(), dest.display(), feats.rows(), feats.dim());
            }
        }
    }
    write_stage_config(&cli.out, "features", config)?;
    Ok(())
}

fn neural_config_from(config: &ConfigMap) -> ToolResult<NeuralConfig> {
    let d = NeuralConfig::default();
    Ok(NeuralConfig {
        n_filters: config.get_usize("neural.n_filters", d.n_filters)?,
        filter_lo_hz: config.get_f64("neural.filter_lo_hz", d.filter_lo_hz)?,
        filter_hi_hz: config.get_f64("neural.filter_hi_hz", d.filter_hi_hz)?,
        fractional_bandwidth: config
            .get_f64("neural.fractional_bandwidth", d.fractional_bandwidth)?,
        band_lo_hz: config.get_f64("neural.band_lo_hz", d.band_lo_hz)?,
        band_hi_hz: config.get_f64("neural.band_hi_hz", d.band_hi_hz)?,
        log_eps: config.get_f64("neural.log_eps", d.log_eps)?,
        out_rate_hz: config.get_f64("neural.out_rate_hz", d.out_rate_hz)?,
        pca_dim: config.get_usize("neural.pca_dim", d.pca_dim)?,
        nmf_dim: config.get_usize("neural.nmf_dim", d.nmf_dim)?,
        nmf_iters: config.get_usize("neural.nmf_iters", d.nmf_iters)?,
        reject_z: config.get_f64("neural.reject_z", d.reject_z)?,
    })
}

fn cmd_train_asr(cli: &Cli, config: &ConfigMap, data: &Path, list: Option<&Path>) -> CliResult {
    let cfg = ExperimentConfig::from_config(config)?;
    let inv = PhoneInventory::default_folded();
    let items = load_data(data, list, Stream::Acoustic, &inv)?;

    // Timed initialization when every utterance has ground-truth
    // alignments (the stand-in for manual transcriptions); flat start
    // otherwise.
    let all_timed = items.iter().all(|i| i.truth_alignment.is_some());
    let feats: Vec<&FeatureMatrix> = items.iter().map(|i| &i.feats).collect();
    let init = if all_timed {
        let timed: Vec<(&FeatureMatrix, Vec<FrameSegment>)> = items
            .iter()
            .map(|i| {
                (
                    &i.feats,
                    alignment_to_segments(i.truth_alignment.as_ref().unwrap()),
                )
            })
            .collect();
        let (set, missing) =
            init_from_timed_transcriptions(&timed, &inv, cfg.states_per_phone)?;
        if !missing.is_empty() {
            let labels: Vec<&str> = missing.iter().map(|&p| inv.label(p)).collect();
            eprintln!(
                "warning: no data for {} phone(s), using global statistics: {}",
                labels.len(),
                labels.join(" ")
            );
        }
        set
    } else {
        phonekit::hmm::flat_start_init(&feats, &inv, cfg.states_per_phone)?
    };

    let lattices: Vec<_> = items
        .iter()
        .map(|i| build_training_lattice(&i.transcript, &inv, None))
        .collect::<ToolResult<Vec<_>>>()?;
    let pairs: Vec<(&FeatureMatrix, &phonekit::lattice::Lattice)> = items
        .iter()
        .zip(&lattices)
        .map(|(i, l)| (&i.feats, l))
        .collect();
    let gmm = gmm_training_recipe(init, &pairs, cfg.gmm_iters, cfg.mixture_target)?;

    let hybrid = if cfg.use_dnn {
        let alis = align_corpus(
            &TrainedSystem {
                gmm: gmm.clone(),
                hybrid: None,
            },
            &pairs,
        )?;
        Some(train_hybrid(&cfg, &gmm, &feats, &alis, cfg.seed)?)
    } else {
        None
    };
    let system = TrainedSystem { gmm, hybrid };

    let transcripts: Vec<PhoneSequence> = items.iter().map(|i| i.transcript.clone()).collect();
    let lm = train_biphone_lm(&transcripts, &inv, cfg.smoothing)?;

    let mut meta = BTreeMap::new();
    meta.insert("stream".into(), "acoustic".into());
    meta.insert("splice_context".into(), cfg.splice_context.to_string());
    meta.insert("init".into(), if all_timed { "timed" } else { "flat" }.into());
    let dest = cli.out.join("asr.mdl");
    save_system(&dest, &system, &lm, meta)?;
    write_stage_config(&cli.out, "asr", &cfg.to_config())?;
    write_train_log(&cli.out, "asr", &items, &system)?;
    println!(
        "trained acoustic system on {} utterances -> {}",
        items.len(),
        dest.display()
    );
    Ok(())
}

fn cmd_align(
    cli: &Cli,
    model: &Path,
    data: &Path,
    list: Option<&Path>,
    stream: Stream,
) -> CliResult {
    let (system, _lm, _meta) = load_system(model)?;
    let inv = system.gmm.inventory().clone();
    let items = load_data(data, list, stream, &inv)?;
    let out_dir = cli.out.join("align");
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let lattices: Vec<_> = items
        .iter()
        .map(|i| build_training_lattice(&i.transcript, &inv, None))
        .collect::<ToolResult<Vec<_>>>()?;
    let pairs: Vec<(&FeatureMatrix, &phonekit::lattice::Lattice)> = items
        .iter()
        .zip(&lattices)
        .map(|(i, l)| (&i.feats, l))
        .collect();
    let alignments = align_corpus(&system, &pairs)?;
    let mut log = String::new();
    for (item, ali) in items.iter().zip(&alignments) {
        write_alignment(ali, &inv, out_dir.join(format!("{}.ali", item.id)))?;
        log.push_str(&format!("{} frames {}\n", item.id, ali.len()));
    }
    let log_path = out_dir.join("align.log");
    fs::write(&log_path, log).map_err(|e| Error::io(&log_path, e))?;
    println!("aligned {} utterances -> {}", items.len(), out_dir.display());
    Ok(())
}

fn cmd_train_nsr(
    cli: &Cli,
    config: &ConfigMap,
    data: &Path,
    list: Option<&Path>,
    alignments: &Path,
) -> CliResult {
    let cfg = ExperimentConfig::from_config(config)?;
    let inv = PhoneInventory::default_folded();
    let items = load_data(data, list, Stream::Neural, &inv)?;

    // Transferred alignments are a hard prerequisite.
    let mut transferred = Vec::with_capacity(items.len());
    for item in &items {
        let path = alignments.join(format!("{}.ali", item.id));
        if !path.exists() {
            return Err(CliError::Tool(Error::MissingPrerequisite {
                artifact: path.display().to_string(),
                command: "phonekit align".into(),
            }));
        }
        transferred.push(read_alignment(&path, &inv)?);
    }

    let ali_pairs: Vec<(&FeatureMatrix, &Alignment)> = items
        .iter()
        .zip(&transferred)
        .map(|(i, a)| (&i.feats, a))
        .collect();
    let (init, _missing) = init_from_alignments(&ali_pairs, &inv, cfg.states_per_phone)?;

    // Optional-silence training lattices with the configured skip
    // probability.
    let lattices: Vec<_> = items
        .iter()
        .map(|i| {
            build_training_lattice(
                &i.transcript,
                &inv,
                Some((cfg.skip_prob, cfg.leading_silence)),
            )
        })
        .collect::<ToolResult<Vec<_>>>()?;
    let pairs: Vec<(&FeatureMatrix, &phonekit::lattice::Lattice)> = items
        .iter()
        .zip(&lattices)
        .map(|(i, l)| (&i.feats, l))
        .collect();
    let gmm = gmm_training_recipe(init, &pairs, cfg.gmm_iters, cfg.mixture_target)?;

    let hybrid = if cfg.use_dnn {
        let feats: Vec<&FeatureMatrix> = items.iter().map(|i| &i.feats).collect();
        let alis = align_corpus(
            &TrainedSystem {
                gmm: gmm.clone(),
                hybrid: None,
            },
            &pairs,
        )?;
        Some(train_hybrid(&cfg, &gmm, &feats, &alis, cfg.seed ^ 0x4E53_5200)?)
    } else {
        None
    };
    let system = TrainedSystem { gmm, hybrid };

    let transcripts: Vec<PhoneSequence> = items.iter().map(|i| i.transcript.clone()).collect();
    let lm = train_biphone_lm(&transcripts, &inv, cfg.smoothing)?;

    let mut meta = BTreeMap::new();
    meta.insert("stream".into(), "neural".into());
    meta.insert("splice_context".into(), cfg.splice_context.to_string());
    meta.insert("skip_prob".into(), cfg.skip_prob.to_string());
    let dest = cli.out.join("nsr.mdl");
    save_system(&dest, &system, &lm, meta)?;
    write_stage_config(&cli.out, "nsr", &cfg.to_config())?;
    write_train_log(&cli.out, "nsr", &items, &system)?;
    println!(
        "trained neural system on {} utterances -> {}",
        items.len(),
        dest.display()
    );
    Ok(())
}

fn cmd_decode(
    cli: &Cli,
    config: &ConfigMap,
    model: &Path,
    data: &Path,
    list: Option<&Path>,
    stream: Stream,
) -> CliResult {
    let lm_scale = config.get_f64("lm.scale", 1.0)?;
    let strip = config.get_bool("decode.strip_silence", true)?;
    let (system, lm, _meta) = load_system(model)?;
    let inv = system.gmm.inventory().clone();
    let items = load_data(data, list, stream, &inv)?;
    let out_dir = cli.out.join("decode");
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let graph = compile_decode_graph(&lm, &system.gmm, lm_scale)?;
    let mut log = String::new();
    for item in &items {
        let scores = system.score_matrix(&item.feats)?;
        let result = viterbi_decode(&graph, &system.gmm, &scores, strip)?;
        let hyp_path = out_dir.join(format!("{}.hyp", item.id));
        let labels = result.phones.labels(&inv).join(" ");
        fs::write(&hyp_path, format!("{labels}\n")).map_err(|e| Error::io(&hyp_path, e))?;
        log.push_str(&format!(
            "{} frames {} log_score {:.6} acoustic {:.6} lm {:.6}\n",
            item.id,
            item.feats.rows(),
            result.log_score,
            result.acoustic_logp,
            result.lm_logp
        ));
    }
    let log_path = out_dir.join("decode.log");
    fs::write(&log_path, log).map_err(|e| Error::io(&log_path, e))?;
    println!("decoded {} utterances -> {}", items.len(), out_dir.display());
    Ok(())
}

fn cmd_evaluate(
    cli: &Cli,
    config: &ConfigMap,
    cv: bool,
    refs: Option<&Path>,
    hyps: Option<&Path>,
    list: Option<&Path>,
) -> CliResult {
    if cv {
        let cfg = ExperimentConfig::from_config(config)?;
        let outcome = run_cross_validation(&cfg)?;
        let table = cli.out.join("report.txt");
        let machine = cli.out.join("report.tsv");
        outcome.report.write_files(&table, &machine)?;
        write_stage_config(&cli.out, "evaluate", &cfg.to_config())?;
        print!("{}", outcome.report.render_table());
        for (cut, msg) in &outcome.failures {
            eprintln!("cut {cut} failed: {msg}");
        }
        if !outcome.failures.is_empty() {
            return Err(CliError::Tool(Error::Numeric {
                what: "cross-validation",
                detail: format!("{} cut(s) failed", outcome.failures.len()),
            }));
        }
        println!("report -> {} and {}", table.display(), machine.display());
        return Ok(());
    }

    let (refs, hyps) = match (refs, hyps) {
        (Some(r), Some(h)) => (r, h),
        _ => {
            return Err(CliError::Usage(
                "evaluate needs either --cv or both --refs and --hyps".into(),
            ))
        }
    };
    let inv = PhoneInventory::default_folded();
    let ids = match list {
        Some(p) => read_id_list(p)?,
        None => discover_ids(refs)?,
    };
    if ids.is_empty() {
        return Err(CliError::Tool(Error::InvalidParam(format!(
            "no references found in {}",
            refs.display()
        ))));
    }
    let mut errors = 0usize;
    let mut total = 0usize;
    for id in &ids {
        let reference = corpus::read_transcript(refs.join(format!("{id}.txt")), &inv)?
            .phone_sequence();
        let hyp_path = hyps.join(format!("{id}.hyp"));
        if !hyp_path.exists() {
            return Err(CliError::Tool(Error::MissingPrerequisite {
                artifact: hyp_path.display().to_string(),
                command: "phonekit decode".into(),
            }));
        }
        let hyp_text = fs::read_to_string(&hyp_path).map_err(|e| Error::io(&hyp_path, e))?;
        let labels: Vec<&str> = hyp_text.split_whitespace().collect();
        let hypothesis = PhoneSequence::from_labels(&inv, &labels)?;
        let res = phone_error_rate(&reference, &hypothesis, inv.silence())?;
        println!(
            "{id}: PER {:.2}% (S {} D {} I {} / {})",
            res.per(),
            res.substitutions,
            res.deletions,
            res.insertions,
            res.ref_length
        );
        errors += res.errors();
        total += res.ref_length;
    }
    println!(
        "TOTAL: PER {:.2}% over {} reference phones",
        100.0 * errors as f64 / total as f64,
        total
    );
    Ok(())
}

fn cmd_synth(cli: &Cli, config: &ConfigMap, n: Option<usize>) -> CliResult {
    let cfg = ExperimentConfig::from_config(config)?;
    let n = n.unwrap_or(cfg.n_utterances);
    let spec: GeneratorSpec = cfg.generator()?;
    let corpus_items = generate_corpus(&spec, n)?;
    let inv = spec.inventory.clone();
    let out_dir = cli.out.join("synth");
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let mut list = String::new();
    for u in &corpus_items {
        u.acoustic
            .write_ftr(out_dir.join(format!("{}.acoustic.ftr", u.id)))?;
        u.neural
            .write_ftr(out_dir.join(format!("{}.neural.ftr", u.id)))?;
        corpus::write_untimed_transcript(
            &u.transcript,
            &inv,
            out_dir.join(format!("{}.txt", u.id)),
        )?;
        write_alignment(
            &u.acoustic_alignment,
            &inv,
            out_dir.join(format!("{}.acoustic.ali", u.id)),
        )?;
        write_alignment(
            &u.neural_alignment,
            &inv,
            out_dir.join(format!("{}.neural.ali", u.id)),
        )?;
        list.push_str(&u.id);
        list.push('\n');
    }
    let list_path = out_dir.join("corpus.list");
    fs::write(&list_path, list).map_err(|e| Error::io(&list_path, e))?;
    write_stage_config(&cli.out, "synth", &cfg.to_config())?;
    println!("generated {n} utterances -> {}", out_dir.display());
    Ok(())
}
