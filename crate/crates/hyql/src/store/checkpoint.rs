//! Run checkpoints.
//!
//! A checkpoint is a line-oriented text file. After the `hyql-checkpoint 1`
//! header come sections introduced by `@name`; counted sections state their
//! line count so truncation is detected before the `@end <lines>` trailer.
//! Situations are stored by their full encoding.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use hyql_core::casebase::{Case, CaseBase};
use hyql_core::collab::{Neighbourhood, Transaction, UserId};
use hyql_core::context::{GroupId, LocationHierarchy, Situation, StateId};
use hyql_core::hyql::{Agent, AgentConfig, AgentParts, CfParts, CfState};
use hyql_core::qlearning::{ActionId, QTable};
use hyql_core::sim::{Run, RunKey, SimConfig, TrialRecord};
use hyql_core::Rng;
use rand_chacha::rand_core::SeedableRng;

use super::table::write_atomic;
use crate::config::{parse_config, ConfigFile};
use crate::{Error, Result};

const HEADER: &str = "hyql-checkpoint 1";

/// Everything needed to resume a run after its last logged trial.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: SimConfig,
    pub key: RunKey,
    pub agent: Agent,
    pub feedback_rng: Rng,
    pub records: Vec<TrialRecord>,
}

impl PartialEq for Checkpoint {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.key == other.key
            && self.agent == other.agent
            && self.feedback_rng == other.feedback_rng
            && self.records == other.records
    }
}

impl Checkpoint {
    pub fn from_run(config: &SimConfig, run: &Run) -> Self {
        Checkpoint {
            config: config.clone(),
            key: run.key(),
            agent: run.agent().clone(),
            feedback_rng: run.feedback_rng().clone(),
            records: run.records().to_vec(),
        }
    }

    pub fn into_run(self) -> Result<Run> {
        Ok(Run::resume(
            &self.config,
            self.key,
            self.agent,
            self.feedback_rng,
            self.records,
        )?)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut push = |line: String| {
            out.push_str(&line);
            out.push('\n');
        };
        push(HEADER.to_owned());

        let toml = ConfigFile::from(&self.config).to_toml();
        let toml_lines: Vec<&str> = toml.lines().collect();
        push(format!("@config {}", toml_lines.len()));
        for l in toml_lines {
            push(l.to_owned());
        }

        let parts = self.agent.parts();
        push("@run".into());
        push(format!("seed {}", self.key.seed));
        push(format!("variant {}", self.key.variant));
        push(format!("target {}", self.key.target.0));
        push(format!("group {}", parts.group.0));
        push(format!("trial {}", parts.trial));
        push(format!("@rng agent {}", rng_fields(&parts.rng)));
        push(format!("@rng feedback {}", rng_fields(&self.feedback_rng)));

        let q = &parts.qtable;
        push(format!("@actions {}", join(q.actions().iter().map(|a| a.0))));
        let cells: Vec<_> = q.cells().collect();
        push(format!("@qtable {} {}", cells.len(), q.default_value()));
        for (s, a, v, n) in cells {
            push(format!("{}\t{}\t{v}\t{n}", s.0, a.0));
        }

        match &parts.casebase {
            None => push("@cases -".into()),
            Some(cb) => {
                push(format!("@cases {}", cb.len()));
                for c in cb.cases() {
                    push(format!(
                        "{}\t{}\t{}\t{}\t{}",
                        c.situation.encode().0,
                        c.action.0,
                        c.successes,
                        c.attempts,
                        c.last_trial
                    ));
                }
            }
        }

        match &parts.cf {
            None => push("@cf -".into()),
            Some(cf) => {
                let p = cf.parts();
                push(format!(
                    "@cf {} {} {} {} {} {}",
                    p.user.0, p.visible, p.steps_since_rebuild, p.sizes.k_users, p.sizes.k_items, p.rebuild_every
                ));
                push(format!("@items {}", join(p.items.iter().map(|a| a.0))));
                push(format!("@roster {}", p.roster.len()));
                for (u, g) in &p.roster {
                    push(format!("{}\t{}", u.0, g.0));
                }
                push(format!("@transactions {}", p.transactions.len()));
                for t in &p.transactions {
                    push(format!(
                        "{}\t{}\t{}\t{}\t{}\t{}",
                        t.id, t.user.0, t.item.0, t.rating, t.state.0, t.trial
                    ));
                }
            }
        }

        push(format!("@trials {}", self.records.len()));
        for r in &self.records {
            push(format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.trial,
                r.situation.encode().0,
                r.action.0,
                r.source.as_str(),
                u8::from(r.accepted),
                r.q_before,
                r.q_after
            ));
        }
        let total = out.lines().count() + 1;
        out.push_str(&format!("@end {total}\n"));
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut c = Cursor::new(text, origin);
        let header = c.next_line()?;
        if header != HEADER {
            return Err(c.error(format!("expected {HEADER:?}, found {header:?}")));
        }

        let n = c.section("config")?.parse_count(&c)?;
        let config_line = c.line + 1;
        let toml = (0..n).map(|_| c.next_line()).collect::<Result<Vec<_>>>()?.join("\n");
        let config = parse_config(&toml, &format!("{}:{config_line}", origin.display()))
            .and_then(|f| f.to_sim())
            .map_err(|e| Error::data(origin, config_line, e))?;
        let hierarchy = &config.context.hierarchy;

        c.section("run")?.expect_empty(&c)?;
        let seed: u64 = c.keyed("seed")?;
        let variant = c.keyed("variant")?;
        let target = UserId(c.keyed("target")?);
        let group = GroupId(c.keyed("group")?);
        let trial: u32 = c.keyed("trial")?;
        let key = RunKey { seed, variant, target };
        let agent_rng = c.rng("agent")?;
        let feedback_rng = c.rng("feedback")?;

        let actions: Vec<ActionId> = c.section("actions")?.ids(&c)?;
        let (n, default) = {
            let args = c.section("qtable")?;
            let f = args.fields::<2>(&c)?;
            (
                c.parse::<usize>("cell count", f[0])?,
                c.parse::<f64>("default value", f[1])?,
            )
        };
        let mut cells = Vec::with_capacity(n);
        for _ in 0..n {
            let f = c.row::<4>()?;
            cells.push((
                StateId(c.parse("state", f[0])?),
                ActionId(c.parse("action", f[1])?),
                c.parse("value", f[2])?,
                c.parse("visits", f[3])?,
            ));
        }
        let qtable = QTable::from_parts(actions, default, cells).map_err(|e| c.error(e))?;

        let agent_config = AgentConfig {
            variant,
            ..config.agent.clone()
        };

        let cases = c.section("cases")?;
        let casebase = if cases.is_absent() {
            None
        } else {
            let n = cases.parse_count(&c)?;
            let mut cb = CaseBase::new(
                agent_config.reuse_threshold,
                agent_config.success_threshold,
                agent_config.similarity.clone(),
            )
            .map_err(|e| c.error(e))?;
            for _ in 0..n {
                let f = c.row::<5>()?;
                let case = Case {
                    situation: c.situation(f[0], hierarchy)?,
                    action: ActionId(c.parse("action", f[1])?),
                    successes: c.parse("successes", f[2])?,
                    attempts: c.parse("attempts", f[3])?,
                    last_trial: c.parse("last trial", f[4])?,
                };
                cb.insert(case).map_err(|e| c.error(e))?;
            }
            Some(cb)
        };

        let cf_args = c.section("cf")?;
        let cf = if cf_args.is_absent() {
            None
        } else {
            let f = cf_args.fields::<6>(&c)?;
            let user = UserId(c.parse("user", f[0])?);
            let visible = c.parse("visible", f[1])?;
            let steps_since_rebuild = c.parse("steps since rebuild", f[2])?;
            let sizes = Neighbourhood {
                k_users: c.parse("k_users", f[3])?,
                k_items: c.parse("k_items", f[4])?,
            };
            let rebuild_every = c.parse("rebuild_every", f[5])?;
            let items = c.section("items")?.ids(&c)?;
            let n = c.section("roster")?.parse_count(&c)?;
            let mut roster = BTreeMap::new();
            for _ in 0..n {
                let f = c.row::<2>()?;
                roster.insert(UserId(c.parse("user", f[0])?), GroupId(c.parse("group", f[1])?));
            }
            if roster.len() != n {
                return Err(c.error("duplicate roster entry"));
            }
            let n = c.section("transactions")?.parse_count(&c)?;
            let mut transactions = Vec::with_capacity(n);
            for _ in 0..n {
                let f = c.row::<6>()?;
                transactions.push(Transaction {
                    id: c.parse("id", f[0])?,
                    user: UserId(c.parse("user", f[1])?),
                    item: ActionId(c.parse("item", f[2])?),
                    rating: c.parse("rating", f[3])?,
                    state: StateId(c.parse("state", f[4])?),
                    trial: c.parse("trial", f[5])?,
                });
            }
            let parts = CfParts {
                user,
                items,
                roster,
                transactions,
                visible,
                steps_since_rebuild,
                sizes,
                rebuild_every,
            };
            Some(CfState::from_parts(parts).map_err(|e| c.error(e))?)
        };

        let n = c.section("trials")?.parse_count(&c)?;
        let mut records = Vec::with_capacity(n);
        for _ in 0..n {
            let f = c.row::<7>()?;
            records.push(TrialRecord {
                seed,
                variant,
                user: target,
                trial: c.parse("trial", f[0])?,
                situation: c.situation(f[1], hierarchy)?,
                action: ActionId(c.parse("action", f[2])?),
                source: c.parse("source", f[3])?,
                accepted: c.flag("accepted", f[4])?,
                q_before: c.parse("q_before", f[5])?,
                q_after: c.parse("q_after", f[6])?,
            });
        }

        let end = c.section("end")?;
        let total = end.parse_count(&c)?;
        if total != c.line {
            return Err(c.error(format!("trailer counts {total} lines, file has {}", c.line)));
        }
        if c.lines.next().is_some() {
            return Err(c.error("content after @end"));
        }
        if !text.ends_with('\n') {
            return Err(c.error("truncated final line"));
        }

        let agent = Agent::from_parts(AgentParts {
            config: agent_config,
            user: target,
            group,
            qtable,
            casebase,
            cf,
            rng: agent_rng,
            trial,
        })
        .map_err(|e| Error::data(origin, 0, e))?;
        Ok(Checkpoint {
            config,
            key,
            agent,
            feedback_rng,
            records,
        })
    }

    /// Replaces `path` atomically.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.render())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::parse(&text, path)
    }
}

fn join(ids: impl Iterator<Item = u32>) -> String {
    let mut s = String::new();
    for (i, id) in ids.enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{id}").expect("writing to a String");
    }
    s
}

fn rng_fields(rng: &Rng) -> String {
    let mut seed = String::with_capacity(64);
    for b in rng.get_seed() {
        write!(seed, "{b:02x}").expect("writing to a String");
    }
    format!("{seed} {} {}", rng.get_stream(), rng.get_word_pos())
}

struct Cursor<'a> {
    lines: std::str::Lines<'a>,
    origin: &'a Path,
    /// 1-based number of the last line read.
    line: usize,
}

/// Arguments following a section name.
struct Args<'a>(&'a str);

impl<'a> Args<'a> {
    fn is_absent(&self) -> bool {
        self.0 == "-"
    }

    fn expect_empty(&self, c: &Cursor) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(c.error(format!("unexpected arguments {:?}", self.0)))
        }
    }

    fn parse_count(&self, c: &Cursor) -> Result<usize> {
        c.parse("count", self.0)
    }

    fn fields<const N: usize>(&self, c: &Cursor) -> Result<[&'a str; N]> {
        let f: Vec<&str> = self.0.split(' ').collect();
        f.try_into()
            .map_err(|f: Vec<&str>| c.error(format!("{} arguments, expected {N}", f.len())))
    }

    fn ids(&self, c: &Cursor) -> Result<Vec<ActionId>> {
        if self.0.is_empty() {
            return Ok(Vec::new());
        }
        self.0.split(' ').map(|s| c.parse("action", s).map(ActionId)).collect()
    }
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, origin: &'a Path) -> Self {
        Cursor {
            lines: text.lines(),
            origin,
            line: 0,
        }
    }

    fn error(&self, message: impl ToString) -> Error {
        Error::data(self.origin, self.line, message)
    }

    fn next_line(&mut self) -> Result<&'a str> {
        match self.lines.next() {
            Some(l) => {
                self.line += 1;
                Ok(l)
            }
            None => Err(Error::data(self.origin, self.line + 1, "unexpected end of checkpoint")),
        }
    }

    fn section(&mut self, name: &str) -> Result<Args<'a>> {
        let line = self.next_line()?;
        let rest = line
            .strip_prefix('@')
            .and_then(|l| l.strip_prefix(name))
            .filter(|r| r.is_empty() || r.starts_with(' '))
            .ok_or_else(|| self.error(format!("expected section @{name}, found {line:?}")))?;
        Ok(Args(rest.strip_prefix(' ').unwrap_or(rest)))
    }

    fn keyed<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let line = self.next_line()?;
        let value = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| self.error(format!("expected {key:?}, found {line:?}")))?;
        self.parse(key, value)
    }

    fn row<const N: usize>(&mut self) -> Result<[&'a str; N]> {
        let line = self.next_line()?;
        let f: Vec<&str> = line.split('\t').collect();
        f.try_into()
            .map_err(|f: Vec<&str>| self.error(format!("{} fields, expected {N}", f.len())))
    }

    fn parse<T: FromStr>(&self, what: &str, value: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        value.parse().map_err(|e| self.error(format!("{what} {value:?}: {e}")))
    }

    fn flag(&self, what: &str, value: &str) -> Result<bool> {
        super::table::field::flag(what, value).map_err(|m| self.error(m))
    }

    fn situation(&self, value: &str, hierarchy: &LocationHierarchy) -> Result<Situation> {
        Situation::decode(StateId(self.parse("situation", value)?), hierarchy).map_err(|e| self.error(e))
    }

    fn rng(&mut self, name: &str) -> Result<Rng> {
        let args = self.section(&format!("rng {name}"))?;
        let [seed_hex, stream, word_pos] = args.fields::<3>(self)?;
        if seed_hex.len() != 64 || !seed_hex.is_ascii() {
            return Err(self.error(format!("rng seed {seed_hex:?} is not 64 hex digits")));
        }
        let mut seed = [0u8; 32];
        for (i, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&seed_hex[2 * i..2 * i + 2], 16)
                .map_err(|e| self.error(format!("rng seed: {e}")))?;
        }
        let mut rng = Rng::from_seed(seed);
        rng.set_stream(self.parse("rng stream", stream)?);
        rng.set_word_pos(self.parse("rng word position", word_pos)?);
        Ok(rng)
    }
}
