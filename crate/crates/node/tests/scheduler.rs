use std::collections::HashMap;
use std::sync::{Arc, Barrier, Mutex};
use std::thread;

use coinami_core::crypto::{Keypair, PublicKey};
use coinami_node::scheduler::{LeaseError, LeaseState, Scheduler};

fn miner(seed: u8) -> PublicKey {
    Keypair::from_seed([seed; 32]).public()
}

#[test]
fn racing_claims_have_one_winner() {
    for round in 0..20 {
        let sched = Arc::new(Mutex::new(Scheduler::new()));
        sched.lock().unwrap().add("last", 60, ());
        let barrier = Arc::new(Barrier::new(16));
        let handles: Vec<_> = (0..16u8)
            .map(|i| {
                let (sched, barrier) = (sched.clone(), barrier.clone());
                thread::spawn(move || {
                    barrier.wait();
                    sched.lock().unwrap().claim(&miner(i + 1), 100).is_ok()
                })
            })
            .collect();
        let winners = handles.into_iter().map(|h| h.join().unwrap()).filter(|&w| w).count();
        assert_eq!(winners, 1, "round {round}");
    }
}

#[derive(Clone, Copy, Debug)]
enum Step {
    Claim(usize),
    Complete(usize),
    Expire,
}

/// Every interleaving of two miners each running claim, complete, claim,
/// complete against two jobs, with one clock jump past the deadlines
/// somewhere in between.
fn interleavings(a: usize, b: usize, e: usize, prefix: &mut Vec<Step>, out: &mut Vec<Vec<Step>>) {
    if a == 0 && b == 0 && e == 0 {
        out.push(prefix.clone());
        return;
    }
    let script = |m: usize, left: usize| if left.is_multiple_of(2) { Step::Claim(m) } else { Step::Complete(m) };
    if a > 0 {
        prefix.push(script(0, a));
        interleavings(a - 1, b, e, prefix, out);
        prefix.pop();
    }
    if b > 0 {
        prefix.push(script(1, b));
        interleavings(a, b - 1, e, prefix, out);
        prefix.pop();
    }
    if e > 0 {
        prefix.push(Step::Expire);
        interleavings(a, b, e - 1, prefix, out);
        prefix.pop();
    }
}

#[test]
fn exhaustive_two_by_two_interleavings() {
    let mut all = Vec::new();
    interleavings(4, 4, 1, &mut Vec::new(), &mut all);
    assert_eq!(all.len(), 630);
    let miners = [miner(1), miner(2)];
    for schedule in all {
        let mut s = Scheduler::new();
        s.add("J1", 10, ());
        s.add("J2", 10, ());
        let mut now = 100;
        // What each miner believes it holds, and who really holds each job.
        let mut held: [Option<String>; 2] = [None, None];
        let mut holder: HashMap<String, usize> = HashMap::new();
        let mut completed: Vec<String> = Vec::new();
        for step in &schedule {
            match *step {
                Step::Claim(m) => match s.claim(&miners[m], now) {
                    Ok((id, deadline)) => {
                        assert_eq!(deadline, now + 10);
                        assert!(!holder.contains_key(&id), "{id} leased twice: {schedule:?}");
                        assert!(!completed.contains(&id));
                        holder.insert(id.clone(), m);
                        held[m] = Some(id);
                    }
                    Err(LeaseError::NoJobs) => held[m] = None,
                    Err(e) => panic!("claim failed with {e}"),
                },
                Step::Complete(m) => {
                    let Some(id) = held[m].take() else { continue };
                    let result = s.complete(&id, &miners[m], now);
                    if holder.get(&id) == Some(&m) {
                        result.unwrap();
                        holder.remove(&id);
                        completed.push(id.clone());
                        assert_eq!(s.state(&id), Some(&LeaseState::Completed));
                    } else {
                        assert!(
                            matches!(result, Err(LeaseError::LeaseExpired | LeaseError::NotLeaseHolder | LeaseError::AlreadyCompleted)),
                            "{result:?} in {schedule:?}"
                        );
                    }
                }
                Step::Expire => {
                    now += 11;
                    let mut expired = s.expire(now);
                    expired.sort();
                    let mut expected: Vec<String> = holder.keys().cloned().collect();
                    expected.sort();
                    assert_eq!(expired, expected);
                    holder.clear();
                }
            }
            let mut sorted = completed.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), completed.len(), "a job completed twice: {schedule:?}");
            assert_eq!(s.completions(), completed.len());
        }
        // Whatever happened, a live miner can finish the rest.
        while let Ok((id, _)) = s.claim(&miners[0], now) {
            s.complete(&id, &miners[0], now).unwrap();
            completed.push(id);
        }
        completed.sort();
        assert_eq!(completed, vec!["J1", "J2"], "{schedule:?}");
        assert_eq!(s.outstanding(), 0);
    }
}
