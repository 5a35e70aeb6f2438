//! `schemanet`: load a knowledge base of parameterized schemata, declare
//! individuals at run time, build the ground Bayesian network, and answer
//! posterior queries under evidence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use schemanet::ground::{add_member, ground, GroundNetwork, NodeId};
use schemanet::infer::{posterior, Evidence};
use schemanet::model::{Identifier, KnowledgeBase};
use schemanet::parser::{parse_command, parse_ground_atom, parse_kb, Command as KbCommand};
use schemanet::validate_kb;

#[derive(Parser)]
#[command(name = "schemanet", version, about = "Dynamic Bayesian networks from schemata")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct MemberArgs {
    /// Extend a type with run-time members: --member person=john,mary
    #[arg(long = "member", value_name = "TYPE=C1,C2,...")]
    members: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate a knowledge base; print all diagnostics.
    Validate { kb: PathBuf },
    /// Ground the knowledge base into a Bayesian network.
    Ground {
        kb: PathBuf,
        #[command(flatten)]
        members: MemberArgs,
        /// Write the network as a Graphviz digraph to this file.
        #[arg(long, value_name = "FILE")]
        dot: Option<PathBuf>,
    },
    /// Answer posterior queries under evidence.
    Query {
        kb: PathBuf,
        #[command(flatten)]
        members: MemberArgs,
        /// Evidence, repeatable: --observe alarm_sounds=true
        #[arg(long = "observe", value_name = "ATOM=BOOL")]
        observe: Vec<String>,
        /// Query atom, repeatable.
        #[arg(long = "query", value_name = "ATOM", required = true)]
        query: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Plain)]
        format: Format,
    },
    /// Run a script of observe/query/member commands against a knowledge base.
    Session { kb: PathBuf, script: PathBuf },
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Plain,
    Json,
}

/// 0 success, 1 domain error, 2 I/O or usage error.
struct Failure {
    code: u8,
}

fn fail(code: u8, message: impl std::fmt::Display) -> Failure {
    eprintln!("{message}");
    Failure { code }
}

fn read_file(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| fail(2, format!("error: cannot read {}: {e}", path.display())))
}

fn load_kb(path: &PathBuf) -> Result<KnowledgeBase, Failure> {
    let text = read_file(path)?;
    let kb = match parse_kb(&text) {
        Ok(kb) => kb,
        Err(diags) => {
            for d in &diags {
                eprintln!("{d}");
            }
            return Err(Failure { code: 1 });
        }
    };
    let diags = validate_kb(&kb);
    if diags.is_empty() {
        Ok(kb)
    } else {
        for d in &diags {
            eprintln!("error: {d}");
        }
        Err(Failure { code: 1 })
    }
}

fn parse_member_flag(flag: &str) -> Result<(Identifier, Vec<Identifier>), Failure> {
    let (type_name, members) = flag
        .split_once('=')
        .ok_or_else(|| fail(2, format!("error: --member expects TYPE=C1,C2, got `{flag}`")))?;
    let type_name = Identifier::new(type_name.trim())
        .map_err(|e| fail(2, format!("error: {e}")))?;
    let mut constants = Vec::new();
    for c in members.split(',') {
        let c = Identifier::new(c.trim()).map_err(|e| fail(2, format!("error: {e}")))?;
        if c.is_parameter() {
            return Err(fail(2, format!("error: member `{c}` must be a lowercase constant")));
        }
        constants.push(c);
    }
    Ok((type_name, constants))
}

fn apply_members(kb: &mut KnowledgeBase, flags: &[String]) -> Result<(), Failure> {
    for flag in flags {
        let (type_name, constants) = parse_member_flag(flag)?;
        match kb.types.iter_mut().find(|t| t.name == type_name) {
            Some(t) => {
                for c in constants {
                    if !t.members.contains(&c) {
                        t.members.push(c);
                    }
                }
            }
            None => kb.types.push(schemanet::model::TypeDecl {
                name: type_name,
                members: constants,
            }),
        }
    }
    Ok(())
}

fn ground_or_fail(kb: &KnowledgeBase) -> Result<GroundNetwork, Failure> {
    ground(kb).map_err(|e| fail(1, format!("error: {e}")))
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur.push(sub.min(prev[j + 1] + 1).min(cur[j] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

fn resolve_atom(net: &GroundNetwork, text: &str) -> Result<NodeId, Failure> {
    let atom = parse_ground_atom(text).map_err(|e| fail(2, format!("error: {e}")))?;
    let id = NodeId::Atom(atom);
    if net.node_index(&id).is_some() {
        return Ok(id);
    }
    let mut candidates: Vec<(usize, String)> = net
        .nodes()
        .iter()
        .map(|n| {
            let name = n.to_string();
            (levenshtein(text, &name), name)
        })
        .collect();
    candidates.sort();
    let near: Vec<String> = candidates.into_iter().take(3).map(|(_, n)| n).collect();
    Err(fail(
        1,
        format!("error: `{text}` is not a node of the network; did you mean: {}", near.join(", ")),
    ))
}

fn parse_observe_flag(net: &GroundNetwork, flag: &str) -> Result<(NodeId, bool), Failure> {
    let (atom, value) = flag
        .split_once('=')
        .ok_or_else(|| fail(2, format!("error: --observe expects ATOM=BOOL, got `{flag}`")))?;
    let value = match value.trim() {
        "true" => true,
        "false" => false,
        other => return Err(fail(2, format!("error: expected true or false, got `{other}`"))),
    };
    Ok((resolve_atom(net, atom.trim())?, value))
}

fn format_evidence(ev: &Evidence) -> String {
    ev.iter()
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn run_queries(
    net: &GroundNetwork,
    ev: &Evidence,
    queries: &[NodeId],
    format: Format,
) -> Result<(), Failure> {
    for q in queries {
        let result = posterior(net, q, ev).map_err(|e| fail(1, format!("error: {e}")))?;
        match format {
            Format::Plain => {
                if ev.is_empty() {
                    println!("P({q}) = {:.6}", result.p_true);
                } else {
                    println!("P({q} | {}) = {:.6}", format_evidence(ev), result.p_true);
                }
            }
            Format::Json => {
                println!(
                    "{{\"query\":\"{q}\",\"p_true\":{:.6},\"evidence_probability\":{:.6}}}",
                    result.p_true, result.evidence_probability
                );
            }
        }
    }
    Ok(())
}

fn cmd_validate(kb_path: &PathBuf) -> Result<(), Failure> {
    let text = read_file(kb_path)?;
    match parse_kb(&text) {
        Ok(kb) => {
            let diags = validate_kb(&kb);
            for d in &diags {
                println!("error: {d}");
            }
            if diags.is_empty() {
                println!("ok");
                Ok(())
            } else {
                Err(Failure { code: 1 })
            }
        }
        Err(diags) => {
            for d in &diags {
                println!("{d}");
            }
            Err(Failure { code: 1 })
        }
    }
}

fn cmd_ground(
    kb_path: &PathBuf,
    members: &MemberArgs,
    dot: Option<&PathBuf>,
) -> Result<(), Failure> {
    let mut kb = load_kb(kb_path)?;
    apply_members(&mut kb, &members.members)?;
    let net = ground_or_fail(&kb)?;
    println!("{} nodes, {} arcs", net.node_count(), net.arc_count());
    if let Some(path) = dot {
        std::fs::write(path, net.to_dot())
            .map_err(|e| fail(2, format!("error: cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_query(
    kb_path: &PathBuf,
    members: &MemberArgs,
    observe: &[String],
    query: &[String],
    format: Format,
) -> Result<(), Failure> {
    let mut kb = load_kb(kb_path)?;
    apply_members(&mut kb, &members.members)?;
    let net = ground_or_fail(&kb)?;
    let mut ev = Evidence::new();
    for flag in observe {
        let (node, value) = parse_observe_flag(&net, flag)?;
        ev.insert(node, value);
    }
    let mut queries = Vec::new();
    for q in query {
        queries.push(resolve_atom(&net, q)?);
    }
    run_queries(&net, &ev, &queries, format)
}

fn cmd_session(kb_path: &PathBuf, script_path: &PathBuf) -> Result<(), Failure> {
    let mut kb = load_kb(kb_path)?;
    let script = read_file(script_path)?;
    // grounded lazily so scripts may declare members before the pool is usable
    let mut net: Option<GroundNetwork> = None;
    let mut ev = Evidence::new();
    for (idx, line) in script.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cmd = parse_command(line)
            .map_err(|e| fail(1, format!("error: script line {}: {e}", idx + 1)))?;
        match cmd {
            KbCommand::AddMember { type_name, constant } => {
                let (new_kb, new_net) = add_member(&kb, &type_name, &constant)
                    .map_err(|e| fail(1, format!("error: {e}")))?;
                kb = new_kb;
                net = Some(new_net);
            }
            KbCommand::Observe(atom, value) => {
                if net.is_none() {
                    net = Some(ground_or_fail(&kb)?);
                }
                let node = resolve_atom(net.as_ref().unwrap(), &atom.to_string())?;
                ev.insert(node, value);
            }
            KbCommand::Query(atom) => {
                if net.is_none() {
                    net = Some(ground_or_fail(&kb)?);
                }
                let net = net.as_ref().unwrap();
                let node = resolve_atom(net, &atom.to_string())?;
                run_queries(net, &ev, &[node], Format::Plain)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::Validate { kb } => cmd_validate(kb),
        Cmd::Ground { kb, members, dot } => cmd_ground(kb, members, dot.as_ref()),
        Cmd::Query { kb, members, observe, query, format } => {
            cmd_query(kb, members, observe, query, *format)
        }
        Cmd::Session { kb, script } => cmd_session(kb, script),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => ExitCode::from(f.code),
    }
}
