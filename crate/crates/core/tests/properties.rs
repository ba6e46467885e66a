use std::collections::BTreeSet;

use leadstep::analysis::{preference_metric, weighted_best_worst, Vote, VoteEntry, VoteTable};
use leadstep::jointspace::{project_wrenches, update_blend, JointCommandState, JointGainSpec, JointGains};
use leadstep::model::{clamp_to_limits, JointVector, KinematicModel};
use leadstep::taskspace::{update_fade, HandFade, TaskGains, Wrench};
use nalgebra::Vector6;
use proptest::prelude::*;

fn model() -> KinematicModel {
    KinematicModel::default_humanoid()
}

fn wrench() -> impl Strategy<Value = Wrench> {
    prop::array::uniform6(-20.0..20.0f64).prop_map(|a| Wrench::from_vector(&Vector6::from(a)))
}

proptest! {
    #[test]
    fn clamp_stays_in_bounds(
        q in prop::collection::vec(-3.0..3.0f64, 16),
        v in prop::collection::vec(-50.0..50.0f64, 16),
        dt in 0.001..0.02f64,
    ) {
        let m = model();
        let (qn, vn) = clamp_to_limits(&m, &JointVector::from_vec(q.clone()), &JointVector::from_vec(v), dt);
        for (i, j) in m.joints().iter().enumerate() {
            prop_assert!(qn[i] >= j.lower && qn[i] <= j.upper);
            prop_assert!(vn[i].abs() <= j.velocity_limit);
            let start = q[i].clamp(j.lower, j.upper);
            if q[i] == start {
                prop_assert!((qn[i] - q[i]).abs() <= j.velocity_limit * dt + 1e-12);
            }
        }
    }

    #[test]
    fn blend_stays_between_floor_and_ceiling(flags in prop::collection::vec(any::<bool>(), 1..400)) {
        let m = model();
        let g = JointGains::for_model(&m, &JointGainSpec::default()).unwrap();
        let mut s = JointCommandState::at_rest(m.hold_posture().clone(), &g);
        for f in flags {
            let next = update_blend(&g, &s, &[f, false], 0.005);
            for i in 0..m.dof() {
                prop_assert!(next.blend[i] >= g.blend_min[i] && next.blend[i] <= g.blend_max[i]);
                let max_step = (g.blend_max[i] - g.blend_min[i]) * 0.005 / g.blend_fade_duration;
                prop_assert!((next.blend[i] - s.blend[i]).abs() <= max_step + 1e-15);
            }
            s = next;
        }
    }

    #[test]
    fn fade_slews_at_most_one_step(ws in prop::collection::vec(wrench(), 1..300), axes in prop::array::uniform6(any::<bool>())) {
        let gains = TaskGains::default();
        let dt = 0.005;
        let mut f = HandFade::default();
        for w in ws {
            let next = update_fade(&gains, &f, &w, &axes, dt);
            let step = dt / gains.fade_duration + 1e-15;
            prop_assert!((0.0..=1.0).contains(&next.lambda));
            prop_assert!((next.lambda - f.lambda).abs() <= step);
            for i in 0..6 {
                prop_assert!((next.mu[i] - f.mu[i]).abs() <= step);
            }
            f = next;
        }
    }

    #[test]
    fn projection_is_linear(a in wrench(), b in wrench(), c in wrench(), d in wrench(), k in -3.0..3.0f64) {
        let m = model();
        let q = m.hold_posture();
        let lhs = project_wrenches(&m, q, &[a + c * k, b + d * k]).unwrap();
        let rhs = project_wrenches(&m, q, &[a, b]).unwrap() + project_wrenches(&m, q, &[c, d]).unwrap() * k;
        prop_assert!((lhs - rhs).amax() < 1e-9);
    }

    #[test]
    fn preference_in_range_and_invariant_under_duplication(
        picks in prop::collection::vec((0usize..4, 0usize..3), 1..30),
        extra in 0usize..3,
    ) {
        let trials = ["NS", "HW", "HD"];
        let mut entries = Vec::new();
        for (p, (t, v)) in picks.iter().enumerate().map(|(i, x)| (i % (4 + extra), x)) {
            let vote = [Vote::Best, Vote::Worst, Vote::None][*v];
            let block = if vote == Vote::Worst { "w" } else { "b" };
            entries.push(VoteEntry { participant: format!("p{p}"), block: block.into(), trial: trials[*t % 3].into(), vote });
        }
        let table = VoteTable::new(entries.clone()).unwrap();
        let mut doubled = entries.clone();
        doubled.extend(entries.iter().map(|e| VoteEntry { participant: format!("{}-copy", e.participant), ..e.clone() }));
        let doubled = VoteTable::new(doubled).unwrap();
        for t in table.trials() {
            let s = preference_metric(&table, t).unwrap();
            prop_assert!((1.0..=5.0).contains(&s));
            prop_assert!((s - preference_metric(&doubled, t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn vote_weights_are_conserved(picks in prop::collection::vec((0usize..5, 0usize..6, 0usize..3), 1..40)) {
        let trials = ["NS", "HW", "HD", "TR", "HW+HD", "HW+TR"];
        let entries: Vec<VoteEntry> = picks.iter().map(|(p, t, v)| VoteEntry {
            participant: format!("p{p}"),
            block: "b1".into(),
            trial: trials[*t].into(),
            vote: [Vote::Best, Vote::Worst, Vote::None][*v],
        }).collect();
        // Drop rows that would mark one trial both ways in the same block.
        let mut seen = BTreeSet::new();
        let entries: Vec<VoteEntry> = entries.into_iter().filter(|e| {
            e.vote == Vote::None || seen.insert((e.participant.clone(), e.trial.clone()))
        }).collect();
        let table = VoteTable::new(entries.clone()).unwrap();
        let w = weighted_best_worst(&table, "b1");
        let voters = |v: Vote| entries.iter().filter(|e| e.vote == v).map(|e| e.participant.clone()).collect::<BTreeSet<_>>().len() as f64;
        let best: f64 = w.values().map(|x| x.best).sum();
        let worst: f64 = w.values().map(|x| x.worst).sum();
        prop_assert!((best - voters(Vote::Best)).abs() < 1e-9);
        prop_assert!((worst - voters(Vote::Worst)).abs() < 1e-9);
    }
}
