use std::path::Path;

use hyql::report::{CurveRow, QRow, TrialRow};
use hyql::store::table::{parse_text, render};
use hyql::store::{
    ActionEvent, CalendarEvent, Checkpoint, DeviceRecord, HistoryRecord, PreferenceRecord, Record, Store, UserRecord,
};
use hyql_core::collab::UserId;
use hyql_core::context::{CognitiveAction, GroupId, StateId};
use hyql_core::hyql::{Source, Variant};
use hyql_core::qlearning::ActionId;
use hyql_core::sim::{Run, RunKey, SimConfig};
use proptest::prelude::*;

fn variant() -> impl Strategy<Value = Variant> {
    prop::sample::select(Variant::ALL.to_vec())
}

fn source() -> impl Strategy<Value = Source> {
    prop::sample::select(vec![
        Source::CbrReuse,
        Source::ExploitGreedy,
        Source::ExploreCf,
        Source::ExploreRandom,
    ])
}

fn cognitive() -> impl Strategy<Value = CognitiveAction> {
    prop::sample::select(CognitiveAction::ALL.to_vec())
}

fn reward() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.0, 1.0])
}

/// Text allowed in a table cell.
fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 ._@/:-]{1,12}"
}

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

fn round_trip<R: Record + PartialEq + std::fmt::Debug>(rows: &[R]) -> Result<(), TestCaseError> {
    let text = render(rows).map_err(|(i, m)| TestCaseError::fail(format!("row {i}: {m}")))?;
    let back: Vec<R> = parse_text(&text, Path::new("p")).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(back.as_slice(), rows);
    prop_assert_eq!(render(&back).unwrap(), text);
    Ok(())
}

prop_compose! {
    fn user_record()(u in any::<u32>(), g in any::<u32>(), d in text()) -> UserRecord {
        UserRecord { user_id: UserId(u), group_id: GroupId(g), device_id: d }
    }
}

prop_compose! {
    fn device_record()(d in text(), s in text(), caps in prop::collection::vec("[a-z]{1,6}", 0..4)) -> DeviceRecord {
        DeviceRecord { device_id: d, screen_class: s, capabilities: caps }
    }
}

prop_compose! {
    fn preference()(seed in any::<u64>(), v in variant(), u in any::<u32>(), a in any::<u32>(), r in reward(),
                    t in any::<u32>(), s in any::<u64>()) -> PreferenceRecord {
        PreferenceRecord { seed, variant: v, user_id: UserId(u), action_id: ActionId(a), reward: r, trial: t,
                           state_id: StateId(s) }
    }
}

prop_compose! {
    fn action_event()(seed in any::<u64>(), v in variant(), u in 0u32..5, ts in any::<u64>(), a in any::<u32>(),
                      src in source(), r in reward()) -> ActionEvent {
        ActionEvent { seed, variant: v, user_id: UserId(u), timestamp: ts, action_id: ActionId(a), source: src,
                      reward: r }
    }
}

prop_compose! {
    fn calendar_event()(seed in any::<u64>(), u in 0u32..5, ts in any::<u64>(), p in text(), c in cognitive())
                        -> CalendarEvent {
        CalendarEvent { seed, user_id: UserId(u), timestamp: ts, place: p, cognitive: c }
    }
}

prop_compose! {
    fn trial_row()(seed in any::<u64>(), v in variant(), u in any::<u32>(), t in any::<u32>(), s in any::<u64>(),
                   full in any::<u64>(), label in text(), a in any::<u32>(), src in source(), acc in any::<bool>(),
                   qb in finite(), qa in finite()) -> TrialRow {
        TrialRow { seed, variant: v, user: UserId(u), trial: t, state_id: StateId(s), situation_id: StateId(full),
                   situation: label, action: ActionId(a), source: src, accepted: acc, q_before: qb, q_after: qa }
    }
}

prop_compose! {
    fn curve_row()(seed in any::<u64>(), v in variant(), u in any::<u32>(), w in 1u32.., p in 0.0f64..=1.0)
                   -> CurveRow {
        CurveRow { seed, variant: v, user: UserId(u), window: w, precision: p }
    }
}

prop_compose! {
    fn q_row()(seed in any::<u64>(), v in variant(), u in any::<u32>(), s in any::<u64>(), a in any::<u32>(),
               value in finite(), n in any::<u64>()) -> QRow {
        QRow { seed, variant: v, user: UserId(u), state_id: StateId(s), action_id: ActionId(a), value, visits: n }
    }
}

proptest! {
    #[test]
    fn user_rows(rows in prop::collection::vec(user_record(), 0..8)) { round_trip(&rows)?; }

    #[test]
    fn device_rows(rows in prop::collection::vec(device_record(), 0..8)) { round_trip(&rows)?; }

    #[test]
    fn preference_rows(rows in prop::collection::vec(preference(), 0..8)) { round_trip(&rows)?; }

    #[test]
    fn action_rows(rows in prop::collection::vec(action_event(), 0..8)) { round_trip(&rows)?; }

    #[test]
    fn event_rows(rows in prop::collection::vec(calendar_event(), 0..8)) { round_trip(&rows)?; }

    #[test]
    fn trial_rows(rows in prop::collection::vec(trial_row(), 0..8)) { round_trip(&rows)?; }

    #[test]
    fn curve_rows(rows in prop::collection::vec(curve_row(), 0..8)) { round_trip(&rows)?; }

    #[test]
    fn q_rows(rows in prop::collection::vec(q_row(), 0..8)) { round_trip(&rows)?; }

    #[test]
    fn history_keeps_append_order_per_user(
        actions in prop::collection::vec(action_event(), 0..10),
        events in prop::collection::vec(calendar_event(), 0..10),
        interleave in prop::collection::vec(any::<bool>(), 20),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::create(dir.path()).unwrap();
        let (mut a, mut e) = (actions.iter(), events.iter());
        for pick_action in interleave {
            let next = if pick_action { a.next().map(|x| HistoryRecord::Action(*x)) }
                       else { e.next().cloned().map(HistoryRecord::Event) };
            if let Some(r) = next {
                store.append_history(r).unwrap();
            }
        }
        for x in a { store.append_history(HistoryRecord::Action(*x)).unwrap(); }
        for x in e { store.append_history(HistoryRecord::Event(x.clone())).unwrap(); }
        prop_assert_eq!(store.scan::<ActionEvent>().unwrap(), actions);
        prop_assert_eq!(store.scan::<CalendarEvent>().unwrap(), events);
        let merged = store.history().unwrap();
        prop_assert!(merged.windows(2).all(|w| (w[0].user_id(), w[0].timestamp()) <= (w[1].user_id(), w[1].timestamp())));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn checkpoints_round_trip_at_any_trial(
        seed in 0u64..1000,
        v in variant(),
        steps in 0usize..=30,
        p in 0.0f64..=1.0,
        alpha in 0.01f64..=1.0,
        include_cognitive in any::<bool>(),
    ) {
        let mut config = SimConfig { n_trials: 30, seeds: vec![seed], ..SimConfig::default() };
        config.agent.params.p = p;
        config.agent.params.alpha = alpha;
        config.agent.include_cognitive = include_cognitive;
        let key = RunKey { seed, variant: v, target: UserId(0) };
        let mut run = Run::start(&config, key).unwrap();
        for _ in 0..steps {
            run.step().unwrap();
        }
        let cp = Checkpoint::from_run(&config, &run);
        let text = cp.render();
        let back = Checkpoint::parse(&text, Path::new("cp")).unwrap();
        prop_assert_eq!(back.render(), text);
        prop_assert!(back == cp);

        let mut resumed = back.into_run().unwrap();
        resumed.run_to_end().unwrap();
        run.run_to_end().unwrap();
        prop_assert_eq!(resumed.records(), run.records());
    }
}
