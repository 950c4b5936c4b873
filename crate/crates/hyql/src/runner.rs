//! Runs an experiment on a worker pool and writes its run directory.

use std::fs;
use std::path::Path;

use hyql_core::collab::UserId;
use hyql_core::sim::{precision_curve, Run, RunKey, RunOutput, SimConfig, TrialLog, World};
use rayon::prelude::*;

use crate::config::ConfigFile;
use crate::report::{self, Manifest, CHECKPOINTS, CURVES, DB, QTABLES, TRIALS};
use crate::store::table::write_table;
use crate::store::{ActionEvent, CalendarEvent, Checkpoint, DeviceRecord, PreferenceRecord, Record, Store, UserRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses every core.
    pub parallelism: Option<usize>,
    /// Write a checkpoint of every run after this many trials.
    pub checkpoint_at: Option<u32>,
}

pub fn checkpoint_name(key: RunKey) -> String {
    format!("{}-{}-{}.ckpt", key.seed, key.variant, key.target.0)
}

fn run_one(config: &SimConfig, key: RunKey, checkpoints: Option<(&Path, u32)>) -> Result<RunOutput> {
    let mut run = Run::start(config, key)?;
    if let Some((dir, at)) = checkpoints {
        while run.records().len() < at as usize && !run.is_finished() {
            run.step()?;
        }
        Checkpoint::from_run(config, &run).write(&dir.join(checkpoint_name(key)))?;
    }
    run.run_to_end()?;
    let (agent, records) = run.into_parts();
    let log = TrialLog::new(records);
    let curve = precision_curve(&log, config.window as usize)?;
    Ok(RunOutput { key, log, curve, agent })
}

/// Every run of `config` in key order, whatever the completion order.
pub fn run_all(config: &SimConfig, options: &RunOptions, checkpoint_dir: Option<&Path>) -> Result<Vec<RunOutput>> {
    config.validate()?;
    let keys = config.run_keys();
    let checkpoints = checkpoint_dir.zip(options.checkpoint_at);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = options.parallelism {
        if n == 0 {
            return Err(Error::config("--parallelism", "must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::config("--parallelism", e))?;
    pool.install(|| keys.par_iter().map(|&k| run_one(config, k, checkpoints)).collect())
}

fn prepare_out_dir(out: &Path) -> Result<()> {
    match fs::read_dir(out) {
        Ok(mut entries) => {
            if entries.next().is_some() {
                return Err(Error::config("--out", format!("{} is not empty", out.display())));
            }
            Ok(())
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => fs::create_dir_all(out).map_err(|e| Error::io(out, e)),
        Err(e) => Err(Error::io(out, e)),
    }
}

/// Runs the experiment and writes `out`, which must be new or empty. The
/// manifest is written last.
pub fn simulate(file: &ConfigFile, out: &Path, options: &RunOptions) -> Result<Manifest> {
    let config = file.to_sim()?;
    let started = report::unix_now();
    prepare_out_dir(out)?;
    let checkpoint_dir = out.join(CHECKPOINTS);
    if options.checkpoint_at.is_some() {
        fs::create_dir_all(&checkpoint_dir).map_err(|e| Error::io(&checkpoint_dir, e))?;
    }
    let outputs = run_all(&config, options, Some(&checkpoint_dir))?;

    let trials: Vec<_> = outputs
        .iter()
        .flat_map(|o| report::trial_rows(o, &config.context))
        .collect();
    write_table(&out.join(TRIALS), &trials)?;
    let curves: Vec<_> = outputs.iter().flat_map(report::curve_rows).collect();
    write_table(&out.join(CURVES), &curves)?;
    let q: Vec<_> = outputs.iter().flat_map(report::q_rows).collect();
    write_table(&out.join(QTABLES), &q)?;
    write_db(&config, &outputs, &out.join(DB))?;

    let mut files = vec![TRIALS.to_owned(), CURVES.to_owned(), QTABLES.to_owned()];
    for table in [
        UserRecord::TABLE,
        DeviceRecord::TABLE,
        PreferenceRecord::TABLE,
        ActionEvent::TABLE,
        CalendarEvent::TABLE,
    ] {
        files.push(format!("{DB}/{table}.tsv"));
    }
    if options.checkpoint_at.is_some() {
        files.extend(
            config
                .run_keys()
                .into_iter()
                .map(|k| format!("{CHECKPOINTS}/{}", checkpoint_name(k))),
        );
    }
    let manifest = Manifest::new(file.clone(), outputs.len(), files, started);
    manifest.write(out)?;
    Ok(manifest)
}

/// Fills the store with the simulated users, their calendars and every
/// recommendation made.
fn write_db(config: &SimConfig, outputs: &[RunOutput], dir: &Path) -> Result<()> {
    let store = Store::create(dir)?;
    let first = *config.seeds.first().expect("validated configuration has seeds");
    let world = World::new(config, first)?;
    let users: Vec<UserRecord> = world
        .users
        .iter()
        .map(|u| UserRecord {
            user_id: u.user_id,
            group_id: u.team,
            device_id: format!("device-{}", u.user_id.0),
        })
        .collect();
    let devices: Vec<DeviceRecord> = users
        .iter()
        .map(|u| DeviceRecord {
            device_id: u.device_id.clone(),
            screen_class: "phone".to_owned(),
            capabilities: Vec::new(),
        })
        .collect();
    store.append_all(&users)?;
    store.append_all(&devices)?;

    let places: Vec<&str> = config.context.hierarchy.place_names().collect();
    let mut events = Vec::new();
    let mut preferences = Vec::new();
    let mut actions = Vec::new();
    let mut calendar_done: Vec<(u64, UserId)> = Vec::new();
    let mut world_seed = None;
    let mut world = world;
    for o in outputs {
        if world_seed != Some(o.key.seed) {
            world = World::new(config, o.key.seed)?;
            world_seed = Some(o.key.seed);
        }
        let user = world.user(o.key.target)?;
        let state_view = o.agent.config().include_cognitive;
        if !calendar_done.contains(&(o.key.seed, o.key.target)) {
            calendar_done.push((o.key.seed, o.key.target));
            for raw in &user.situation_schedule[..config.n_trials as usize] {
                events.push(CalendarEvent {
                    seed: o.key.seed,
                    user_id: user.user_id,
                    timestamp: raw.timestamp,
                    place: places[raw.place.0 as usize].to_owned(),
                    cognitive: raw.cognitive,
                });
            }
        }
        for r in &o.log.records {
            let reward = if r.accepted { 1.0 } else { 0.0 };
            preferences.push(PreferenceRecord {
                seed: r.seed,
                variant: r.variant,
                user_id: r.user,
                action_id: r.action,
                reward,
                trial: r.trial,
                state_id: r.situation.state_view(state_view).encode(),
            });
            actions.push(ActionEvent {
                seed: r.seed,
                variant: r.variant,
                user_id: r.user,
                timestamp: user.situation_schedule[r.trial as usize].timestamp,
                action_id: r.action,
                source: r.source,
                reward,
            });
        }
    }
    store.append_all(&events)?;
    store.append_all(&preferences)?;
    store.append_all(&actions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            n_trials: 20,
            seeds: vec![0, 1, 2],
            ..SimConfig::default()
        }
    }

    #[test]
    fn parallel_runs_match_sequential_ones() {
        let config = small();
        let sequential = hyql_core::sim::run_experiment(&config).unwrap();
        for threads in [1, 4] {
            let options = RunOptions {
                parallelism: Some(threads),
                checkpoint_at: None,
            };
            let parallel = run_all(&config, &options, None).unwrap();
            assert_eq!(parallel.len(), sequential.len());
            for (a, b) in parallel.iter().zip(&sequential) {
                assert_eq!(a.key, b.key);
                assert_eq!(a.log, b.log);
                assert_eq!(a.agent, b.agent);
            }
        }
    }

    #[test]
    fn zero_workers_is_a_config_error() {
        let options = RunOptions {
            parallelism: Some(0),
            checkpoint_at: None,
        };
        assert!(matches!(run_all(&small(), &options, None), Err(Error::Config { .. })));
    }
}
