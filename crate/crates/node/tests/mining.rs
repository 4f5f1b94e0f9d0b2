mod common;

use std::sync::Arc;

use coinami_core::assignment::AssignmentBundle;
use coinami_core::genomics::{parse_alignment_file, serialize_alignment_file};
use coinami_core::ledger::BLOCK_REWARD;
use coinami_node::miner::MineOutcome;
use coinami_node::net::{Endpoint, Server, TcpEndpoint};
use coinami_node::scheduler::LeaseState;
use coinami_node::wire::{Message, RejectCode, WireError};

use common::{fixture, Setup};

#[test]
fn one_job_one_block_at_difficulty_one() {
    let fx = fixture(Setup { samples: 1, ..Setup::default() });
    let miner = fx.miner(10, fx.endpoint(), None);
    let outcome = miner.mine_once(0).unwrap();
    let MineOutcome::Mined(hash) = outcome else { panic!("{outcome:?}") };
    let node = miner.node().lock().unwrap();
    assert_eq!(node.chain().tip(), hash);
    assert_eq!(node.chain().height(), 1);
    assert_eq!(node.chain().balance(&miner.public_key()), BLOCK_REWARD);
    drop(node);
    assert_eq!(miner.mine_once(0).unwrap(), MineOutcome::NoJobs);
    assert_eq!(fx.authority.completions(), 1);
    let done = fx.authority.completed_jobs();
    assert_eq!(done.len(), 1);
    assert_eq!(done[0].per_sample["1"].records.len(), 80);
}

#[test]
fn difficulty_two_needs_two_jobs() {
    let fx = fixture(Setup { difficulty: 2, ..Setup::default() });
    let miner = fx.miner(10, fx.endpoint(), None);
    assert_eq!(miner.mine_once(0).unwrap(), MineOutcome::Progress { counter: 1, required: 2 });
    assert_eq!(miner.node().lock().unwrap().chain().height(), 0);
    assert!(matches!(miner.mine_once(0).unwrap(), MineOutcome::Mined(_)));
    assert_eq!(miner.node().lock().unwrap().chain().height(), 1);
    assert!(miner.open_token(&fx.authority.public_key()).is_none());
}

#[test]
fn open_token_survives_restart() {
    let fx = fixture(Setup { difficulty: 2, ..Setup::default() });
    let dir = tempfile::tempdir().unwrap();
    let node = fx.node();
    {
        let miner = fx.miner_on(10, fx.endpoint(), Some(dir.path().to_path_buf()), node.clone());
        assert!(matches!(miner.mine_once(0).unwrap(), MineOutcome::Progress { .. }));
    }
    let miner = fx.miner_on(10, fx.endpoint(), Some(dir.path().to_path_buf()), node);
    assert_eq!(miner.open_token(&fx.authority.public_key()).map(|t| t.counter), Some(1));
    assert!(matches!(miner.mine_once(0).unwrap(), MineOutcome::Mined(_)));
    assert_eq!(std::fs::read_dir(dir.path().join("tokens")).unwrap().count(), 0);
}

/// Flips one byte of every bundle on its way to the miner.
struct Corrupting(Arc<dyn Endpoint>);

impl Endpoint for Corrupting {
    fn call(&self, msg: Message) -> Result<Message, WireError> {
        match self.0.call(msg)? {
            Message::Bundle { mut bytes } => {
                let last = bytes.len() - 2;
                bytes[last] ^= 0x04;
                Ok(Message::Bundle { bytes })
            }
            other => Ok(other),
        }
    }

    fn describe(&self) -> String {
        "corrupting".into()
    }
}

#[test]
fn corrupt_bundle_is_discarded_and_job_requeued_after_deadline() {
    let fx = fixture(Setup { samples: 1, deadline_secs: 30, ..Setup::default() });
    let victim = fx.miner(10, Arc::new(Corrupting(fx.endpoint())), None);
    let outcome = victim.mine_once(0).unwrap();
    assert!(matches!(outcome, MineOutcome::BadBundle(ref e) if e.contains("digest")), "{outcome:?}");
    let honest = fx.miner(11, fx.endpoint(), None);
    assert_eq!(honest.mine_once(0).unwrap(), MineOutcome::NoJobs);
    fx.clock.advance(31);
    assert!(matches!(honest.mine_once(0).unwrap(), MineOutcome::Mined(_)));
}

fn claim_and_map(fx: &common::Fixture, miner: coinami_core::crypto::PublicKey) -> (String, String) {
    let Message::JobOffer { job_id, .. } = fx.authority.handle(Message::JobClaim { miner }) else { panic!("no job") };
    let Message::Bundle { bytes } = fx.authority.handle(Message::AssignmentFetch { job_id: job_id.clone(), miner }) else {
        panic!("no bundle")
    };
    let bundle = AssignmentBundle::from_bytes(&bytes).unwrap();
    let (m1, m2) = bundle.reads().unwrap();
    let Message::Reference { fasta } = fx.authority.handle(Message::ReferenceFetch { reference_id: bundle.manifest.reference_id.clone() })
    else {
        panic!("no reference")
    };
    let mapper = coinami_core::mapper::Mapper::new(
        coinami_core::genomics::parse_fasta(&fasta).unwrap(),
        bundle.manifest.params,
    )
    .unwrap();
    (job_id, serialize_alignment_file(&mapper.map_assignment(&m1, &m2)).unwrap())
}

#[test]
fn tampered_result_is_rejected_and_requeued() {
    let fx = fixture(Setup { samples: 1, ..Setup::default() });
    let cheat = coinami_core::crypto::Keypair::from_seed([20; 32]).public();
    let (job_id, honest) = claim_and_map(&fx, cheat);
    // Shift every mapped record one base to the right.
    let mut file = parse_alignment_file(honest.as_bytes()).unwrap();
    for r in file.records.iter_mut().filter(|r| r.pos > 0) {
        r.pos += 1;
    }
    let tampered = serialize_alignment_file(&file).unwrap();
    let reply = fx.authority.handle(Message::ResultSubmit {
        job_id: job_id.clone(),
        miner: cheat,
        prior_token: None,
        result: tampered.into_bytes(),
    });
    assert!(matches!(reply, Message::Rejected { code: RejectCode::DecoyMismatch, .. }), "{reply:?}");
    assert_eq!(fx.authority.job_state(&job_id), Some(LeaseState::Available));

    // Someone else's submission for a lease they do not hold.
    let other = coinami_core::crypto::Keypair::from_seed([21; 32]).public();
    let (job2, result) = claim_and_map(&fx, other);
    assert_eq!(job2, job_id);
    let reply = fx.authority.handle(Message::ResultSubmit {
        job_id: job_id.clone(),
        miner: cheat,
        prior_token: None,
        result: result.clone().into_bytes(),
    });
    assert!(matches!(reply, Message::Rejected { code: RejectCode::NotLeaseHolder, .. }), "{reply:?}");
    let reply = fx.authority.handle(Message::ResultSubmit { job_id, miner: other, prior_token: None, result: result.into_bytes() });
    assert!(matches!(reply, Message::Token { ref token } if token.is_final()), "{reply:?}");
}

#[test]
fn late_result_is_lease_expired() {
    let fx = fixture(Setup { samples: 1, deadline_secs: 5, ..Setup::default() });
    let slow = coinami_core::crypto::Keypair::from_seed([20; 32]).public();
    let (job_id, result) = claim_and_map(&fx, slow);
    fx.clock.advance(6);
    let reply = fx.authority.handle(Message::ResultSubmit { job_id: job_id.clone(), miner: slow, prior_token: None, result: result.into_bytes() });
    assert!(matches!(reply, Message::Rejected { code: RejectCode::LeaseExpired, .. }), "{reply:?}");
    assert_eq!(fx.authority.job_state(&job_id), Some(LeaseState::Available));
}

#[test]
fn prior_token_cannot_be_extended_twice() {
    let fx = fixture(Setup { difficulty: 3, samples: 3, ..Setup::default() });
    let me = coinami_core::crypto::Keypair::from_seed([20; 32]).public();
    let (j1, r1) = claim_and_map(&fx, me);
    let Message::Token { token: first } = fx.authority.handle(Message::ResultSubmit { job_id: j1, miner: me, prior_token: None, result: r1.into_bytes() })
    else {
        panic!()
    };
    let (j2, r2) = claim_and_map(&fx, me);
    let reply = fx.authority.handle(Message::ResultSubmit { job_id: j2, miner: me, prior_token: Some(first.clone()), result: r2.into_bytes() });
    assert!(matches!(reply, Message::Token { ref token } if token.counter == 2));
    let (j3, r3) = claim_and_map(&fx, me);
    let reply = fx.authority.handle(Message::ResultSubmit { job_id: j3, miner: me, prior_token: Some(first), result: r3.into_bytes() });
    assert!(matches!(reply, Message::Rejected { code: RejectCode::InvalidPriorToken, .. }), "{reply:?}");
}

#[test]
fn mining_over_tcp() {
    let fx = fixture(Setup { samples: 1, ..Setup::default() });
    let auth = fx.authority.clone();
    let server = Server::bind("127.0.0.1:0", Arc::new(move |msg, _| auth.handle(msg))).unwrap();
    let endpoint = Arc::new(TcpEndpoint::new(server.local_addr().to_string()));
    let miner = fx.miner(10, endpoint, None);
    assert!(matches!(miner.mine_once(0).unwrap(), MineOutcome::Mined(_)));
    assert_eq!(miner.mine_once(0).unwrap(), MineOutcome::NoJobs);
    server.shutdown();
}
