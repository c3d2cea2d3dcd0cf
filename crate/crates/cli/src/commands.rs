//! Subcommand implementations other than `serve`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sandbox_core::analysis::DiffReport;
use sandbox_core::device_link::{run_sim_agent, AgentConfig};
use sandbox_core::llm::{HttpLlmClient, LlmConfig};
use sandbox_core::persona::{
    generate_persona, validate_persona, FitnessLevel, GeneratorKind, Persona, PersonaHints, PersonaRequest,
};
use sandbox_core::sensor_synth::{synthesize_for_persona, Channel, SampleRates, TraceWindow};
use sandbox_core::session::{
    load_record, load_reports, run_configured_session, session_dir, EventKind, SessionConfig, SessionControl,
    SessionStatus, RECORD_FILE,
};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::cli::{AgentArgs, GenArgs, SessionArgs, SynthArgs};
use crate::error::CliError;
use crate::settings::{pick, Settings, DEFAULT_AGENT_LISTEN, DEFAULT_OUT_DIR};

/// Global options every command sees.
pub struct Ctx {
    pub json: bool,
    pub seed: Option<u64>,
    pub settings: Settings,
}

impl Ctx {
    pub fn seed(&self) -> u64 {
        pick(self.seed, self.settings.seed, 0)
    }

    fn print_json(&self, v: &Value) {
        println!("{}", serde_json::to_string(v).expect("json value serializes"));
    }
}

/// Parses a snake_case enum value the same way its JSON form would be.
fn parse_enum<T: DeserializeOwned>(flag: &str, raw: &str) -> Result<T, CliError> {
    let norm = raw.trim().to_ascii_lowercase().replace(['-', ' '], "_");
    serde_json::from_value(Value::String(norm)).map_err(|_| CliError::Usage(format!("invalid --{flag} value {raw:?}")))
}

/// `1500ms`, `90s`, `10m`, `2h` or bare milliseconds.
pub fn parse_duration_ms(raw: &str) -> Result<u64, CliError> {
    let s = raw.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let n: u64 = num.parse().map_err(|_| CliError::Usage(format!("invalid duration {raw:?}")))?;
    let scale = match unit {
        "" | "ms" => 1,
        "s" => 1_000,
        "m" => 60_000,
        "h" => 3_600_000,
        _ => return Err(CliError::Usage(format!("invalid duration unit in {raw:?}"))),
    };
    n.checked_mul(scale).ok_or_else(|| CliError::Usage(format!("duration {raw:?} overflows")))
}

fn parse_rates(raw: &[String]) -> Result<BTreeMap<Channel, f64>, CliError> {
    let mut out = BTreeMap::new();
    for r in raw {
        let (ch, hz) = r
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--rate expects CHANNEL=HZ, got {r:?}")))?;
        let channel: Channel = ch.parse().map_err(|e| CliError::Usage(format!("--rate {r:?}: {e}")))?;
        let hz: f64 = hz.parse().map_err(|_| CliError::Usage(format!("--rate {r:?}: bad frequency")))?;
        out.insert(channel, hz);
    }
    Ok(out)
}

pub fn persona_gen(ctx: &Ctx, args: &GenArgs) -> Result<(), CliError> {
    let fitness = args
        .fitness
        .as_deref()
        .map(|f| f.parse::<FitnessLevel>().map_err(|_| CliError::Usage(format!("invalid --fitness value {f:?}"))))
        .transpose()?;
    let shift = args.shift.as_deref().map(|s| parse_enum("shift", s)).transpose()?;
    let request = PersonaRequest {
        seed: ctx.seed(),
        hints: PersonaHints {
            name: args.name.clone(),
            age: args.age,
            gender: args.gender.clone(),
            occupation: args.occupation.clone(),
            location: args.location.clone(),
            fitness,
            shift,
        },
        generator: if args.llm { GeneratorKind::Llm } else { GeneratorKind::Template },
    };
    let persona = if args.llm {
        let mut config = ctx.settings.llm.clone().unwrap_or_else(|| LlmConfig::new("", ""));
        if let Some(e) = &args.llm_endpoint {
            config.endpoint = e.clone();
        }
        if let Some(m) = &args.llm_model {
            config.model = m.clone();
        }
        if config.endpoint.is_empty() {
            return Err(CliError::Usage("--llm needs --llm-endpoint, SANDBOX_LLM_ENDPOINT or settings.llm".into()));
        }
        let client = HttpLlmClient::new(config).map_err(|e| CliError::Runtime(e.to_string()))?;
        generate_persona(&request, Some(&client))?
    } else {
        generate_persona(&request, None)?
    };
    let report = validate_persona(&persona);
    match &args.out {
        Some(path) => {
            persona.save(path)?;
            if ctx.json {
                ctx.print_json(&json!({"id": persona.id, "path": path, "validation": report}));
            } else {
                println!("wrote persona {} ({}) to {}", persona.id, persona.name, path.display());
            }
        }
        None => println!("{}", persona.to_canonical_json()),
    }
    Ok(())
}

pub fn persona_validate(ctx: &Ctx, file: &Path) -> Result<(), CliError> {
    let persona = Persona::load(file)?;
    let report = validate_persona(&persona);
    if ctx.json {
        ctx.print_json(&serde_json::to_value(&report).expect("report serializes"));
    } else if report.ok {
        println!("{}: ok ({})", persona.id, report.ruleset);
    } else {
        println!("{}: {} violation(s) ({})", persona.id, report.violations.len(), report.ruleset);
        for v in &report.violations {
            let sev = serde_json::to_value(v.severity).expect("severity serializes");
            println!("  {} [{}] {}", v.rule_id, sev.as_str().unwrap_or("?"), v.message);
        }
    }
    if report.ok {
        Ok(())
    } else {
        Err(CliError::Validation(format!("persona {} failed validation", persona.id)))
    }
}

pub fn trace_synth(ctx: &Ctx, args: &SynthArgs) -> Result<(), CliError> {
    let persona = Persona::load(&args.persona)?;
    let start = chrono_start(&args.start)?;
    let duration = parse_duration_ms(&args.duration)?;
    let rates = SampleRates::with_overrides(&parse_rates(&args.rates)?);
    let seed = ctx.seed();
    let plan = synthesize_for_persona(&persona, TraceWindow::new(start, duration), seed, &rates)?;
    match &args.out {
        Some(path) => {
            plan.save(path)?;
            if ctx.json {
                ctx.print_json(&json!({"path": path, "header": plan.header()}));
            } else {
                println!(
                    "wrote {} frames for {} (seed {seed}) to {}",
                    plan.header().frame_count,
                    persona.id,
                    path.display()
                );
            }
        }
        None => print!("{}", plan.to_jsonl()),
    }
    Ok(())
}

fn chrono_start(raw: &str) -> Result<i64, CliError> {
    chrono::DateTime::parse_from_rfc3339(raw)
        .map(|d| d.timestamp_millis())
        .map_err(|e| CliError::Usage(format!("invalid --start {raw:?}: {e}")))
}

pub fn agent_run(ctx: &Ctx, args: &AgentArgs) -> Result<(), CliError> {
    let mut config = match &args.agent_config {
        Some(p) => AgentConfig::load(p).map_err(|e| CliError::Validation(e.to_string()))?,
        None => AgentConfig::default(),
    };
    config.endpoint = pick(
        args.listen.clone(),
        ctx.settings.agent_listen.clone(),
        DEFAULT_AGENT_LISTEN.to_string(),
    );
    if let Some(seed) = ctx.seed.or(ctx.settings.seed) {
        config.seed = seed;
    }
    if args.drop_after_frames.is_some() {
        config.drop_after_frames = args.drop_after_frames;
    }
    let handle = run_sim_agent(config).map_err(|e| CliError::Runtime(e.to_string()))?;
    if ctx.json {
        ctx.print_json(&json!({"listening": handle.endpoint()}));
    } else {
        println!("agent listening on {}", handle.endpoint());
    }
    loop {
        std::thread::park();
    }
}

pub fn session_run(ctx: &Ctx, args: &SessionArgs) -> Result<(), CliError> {
    let mut config = SessionConfig::load(&args.config)?;
    if let Some(scale) = args.clock_scale.or(ctx.settings.clock_scale) {
        config.clock_scale = scale;
    }
    if let Some(agent) = args.agent.clone().or_else(|| ctx.settings.agent.clone()) {
        config.agent = agent;
    }
    if let Some(d) = &args.duration {
        config.duration_ms = Some(parse_duration_ms(d)?);
    }
    if let Some(seed) = ctx.seed.or(ctx.settings.seed) {
        config.seed = seed;
    }
    let out_dir = pick(args.out_dir.clone(), ctx.settings.out_dir.clone(), PathBuf::from(DEFAULT_OUT_DIR));
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let record = run_configured_session(&config, &base, &out_dir, &SessionControl::default())?;
    let dir = session_dir(&out_dir, &config);

    let mut reports = Vec::new();
    for e in &record.events {
        if let EventKind::DiffEmitted { app_id, pair, report, verdict } = &e.kind {
            reports.push(json!({"file": report, "app_id": app_id, "pair": pair, "verdict": verdict}));
        }
    }
    let errors: Vec<String> = record
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::Error { message } | EventKind::Warning { message } => Some(message.clone()),
            _ => None,
        })
        .collect();
    let status = record.status();
    if ctx.json {
        ctx.print_json(&json!({
            "session_id": record.session_id(),
            "status": status.as_str(),
            "dir": dir,
            "events": record.events.len(),
            "reports": reports,
            "messages": errors,
        }));
    } else {
        println!("session {} {} ({} events) in {}", record.session_id(), status.as_str(), record.events.len(), dir.display());
        for r in &reports {
            println!("  {} {} {}", r["file"].as_str().unwrap_or(""), r["pair"].as_str().unwrap_or(""), r["verdict"].as_str().unwrap_or(""));
        }
        for m in &errors {
            println!("  note: {m}");
        }
    }
    match status {
        SessionStatus::Completed => Ok(()),
        _ => Err(CliError::Runtime(format!(
            "session {} {}: {}",
            record.session_id(),
            status.as_str(),
            errors.last().map(String::as_str).unwrap_or("no further detail")
        ))),
    }
}

pub fn report_show(ctx: &Ctx, path: &Path) -> Result<(), CliError> {
    let reports: Vec<(String, DiffReport)> = if path.is_dir() {
        let record = load_record(&path.join(RECORD_FILE)).map_err(|e| CliError::Runtime(e.to_string()))?.record;
        let files: Vec<String> = record
            .events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::DiffEmitted { report, .. } => Some(report.clone()),
                _ => None,
            })
            .collect();
        files.into_iter().zip(load_reports(path, &record)?).collect()
    } else {
        let r = DiffReport::load(path).map_err(|e| CliError::Validation(e.to_string()))?;
        vec![(path.display().to_string(), r)]
    };
    if ctx.json {
        if path.is_dir() {
            let all: Vec<Value> = reports.iter().map(|(file, r)| json!({"file": file, "report": r})).collect();
            ctx.print_json(&Value::Array(all));
        } else {
            print!("{}", reports[0].1.to_json());
        }
        return Ok(());
    }
    for (file, r) in &reports {
        println!("{file}");
        println!("  app {}  t {} -> {}  verdict {}", r.app_id, r.before.t, r.after.t, r.verdict.as_str());
        let attribution: Vec<&str> = r.attribution.iter().map(|c| c.as_str()).collect();
        if !attribution.is_empty() {
            println!("  attributed to: {}", attribution.join(", "));
        }
        if !r.triggers.is_empty() {
            println!("  triggers: {}", r.triggers.join(", "));
        }
        for c in &r.changes {
            let kind = serde_json::to_value(c.change).expect("change kind serializes");
            let detail = match (&c.before, &c.after) {
                (Some(b), Some(a)) => format!("{b:?} -> {a:?}"),
                (None, Some(a)) => format!("+ {a:?}"),
                (Some(b), None) => format!("- {b:?}"),
                (None, None) => String::new(),
            };
            println!("  {:<10} {:<8} {}", kind.as_str().unwrap_or("?"), c.path, detail);
        }
    }
    Ok(())
}
