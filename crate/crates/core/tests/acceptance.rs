//! Acceptance suite. Each criterion runs at full size under its wall-clock
//! limit and prints one PASS/FAIL line; any failure makes the process exit
//! nonzero.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use coinveil_core::crypto::{measure, Key16, Key32, SeededEntropy, WorkFactor};
use coinveil_core::enclave::{BoundaryError, PeerId, BLOB_LEN};
use coinveil_core::harness::{
    run_execution_game, run_transcript_game, verify_disclosure, Adversary, BoundaryScript,
    GameScript,
};
use coinveil_core::hidden::{cover_count, encode_hidden, ChunkQueue};
use coinveil_core::public::{open_metadata, open_public, seal_metadata, seal_public, METADATA_LEN};
use coinveil_core::transport::{pipe, WindowShuffle};
use coinveil_core::{
    AuthKey, ChannelProfile, Enclave, EnclaveConfig, HiddenKey, IoMode, PublicEnvelope,
    PublicPlaintext, RandomCoin, ReassemblyState,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

const PUB: &str = "public-password";
const HID: &str = "hidden-password";
const DIS: &str = "disclosure-password";
const ALICE: PeerId = *b"alice-ac";
const BOB: PeerId = *b"bob---ac";

fn enclave(profile: ChannelProfile, seed: u64) -> Enclave {
    let mut c = EnclaveConfig::new(profile, Key32::from_array([seed as u8; 32]));
    c.work_factor = WorkFactor::FAST;
    let mut e = Enclave::new(c, Box::new(SeededEntropy::new(seed)));
    e.setup_ceremony(PUB, HID, DIS, "acceptance").unwrap();
    e
}

/// Two provisioned enclaves; in hidden mode they also share a contact.
fn pair(profile: ChannelProfile, hidden: bool, seed: u64) -> (Enclave, Enclave) {
    let (mut a, mut b) = (enclave(profile, seed), enclave(profile, seed + 1));
    let pw = if hidden { HID } else { PUB };
    assert!(a.verify_password(pw).unwrap() && b.verify_password(pw).unwrap());
    let auth = AuthKey::generate(&mut SeededEntropy::new(seed + 2)).unwrap();
    let sid = seed.to_be_bytes();
    a.provision_peer(BOB, &auth, sid).unwrap();
    b.provision_peer(ALICE, &auth, sid).unwrap();
    if hidden {
        let secret = a.secure().unwrap().generate_contact_secret().unwrap();
        a.secure().unwrap().add_contact(BOB, &secret).unwrap();
        b.secure().unwrap().add_contact(ALICE, &secret).unwrap();
    }
    (a, b)
}

fn bandwidth_law() -> Outcome {
    let widths = [
        (ChannelProfile::TelegramLike, 15),
        (ChannelProfile::SignalLike, 16),
        (ChannelProfile::BriarLike, 48),
    ];
    for (profile, c) in widths {
        for n in 1..=4096usize {
            let expected = n.div_ceil(c) + 2;
            let got = cover_count(n, profile).map_err(|e| e.to_string())?;
            ensure!(got == expected, "{profile} n={n}: {got} != {expected}");
        }
    }
    Ok("3 x 4096 lengths exact".into())
}

fn hidden_round_trip() -> Outcome {
    const MESSAGES: usize = 1000;
    const WINDOW: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(0xace);
    let mut delivered = 0;
    let mut covers = 0;
    for (p, profile) in ChannelProfile::ALL.into_iter().enumerate() {
        let (mut a, mut b) = pair(profile, true, 10 * p as u64 + 100);
        let mut shuffle = WindowShuffle::new(WINDOW, rng.next_u64());
        let share = MESSAGES / 3 + usize::from(p < MESSAGES % 3);
        let mut sent = Vec::with_capacity(share);
        let deliver = |b: &mut Enclave, envs: Vec<PublicEnvelope>| -> Outcome {
            for env in envs {
                b.enclave_open(ALICE, &env).map_err(|e| e.to_string())?;
            }
            Ok(String::new())
        };
        for _ in 0..share {
            let mut msg = vec![0u8; rng.gen_range(1..=4096)];
            rng.fill_bytes(&mut msg);
            a.secure()
                .unwrap()
                .queue_hidden(BOB, &msg)
                .map_err(|e| e.to_string())?;
            let tail = rng.gen_range(0..3);
            let mut extra = 0;
            while a.secure().unwrap().covers_needed(BOB) > 0 || extra < tail {
                if a.secure().unwrap().covers_needed(BOB) == 0 {
                    extra += 1;
                }
                let mut body = vec![0u8; rng.gen_range(1..200)];
                rng.fill_bytes(&mut body);
                let env = a.enclave_seal(BOB, &body).map_err(|e| e.to_string())?;
                covers += 1;
                deliver(&mut b, shuffle.push(env))?;
            }
            sent.push(msg);
        }
        deliver(&mut b, shuffle.flush())?;
        let inbox = b.secure().unwrap().read_inbox();
        ensure!(
            inbox.messages.len() == sent.len(),
            "{profile}: {} of {} recovered",
            inbox.messages.len(),
            sent.len()
        );
        for (i, (got, want)) in inbox.messages.iter().zip(&sent).enumerate() {
            ensure!(&got.body == want, "{profile}: message {i} differs");
        }
        delivered += sent.len();
    }
    Ok(format!(
        "{delivered}/{MESSAGES} byte-exact over {covers} public messages, window {WINDOW}"
    ))
}

fn transcript_game() -> Outcome {
    let mut lines = Vec::new();
    for (i, profile) in ChannelProfile::ALL.into_iter().enumerate() {
        let script = GameScript::random(profile, 64, 200, 0x5eed + i as u64);
        let stat = run_transcript_game(&script, Adversary::stat_battery(), 1000)
            .map_err(|e| e.to_string())?;
        ensure!(
            stat.ci_contains_zero() && stat.advantage.abs() < 0.05,
            "{profile}: stat advantage {:+.4} ci [{:+.4},{:+.4}]",
            stat.advantage,
            stat.ci_low,
            stat.ci_high
        );
        let oracle =
            run_transcript_game(&script, Adversary::HmkOracle, 1000).map_err(|e| e.to_string())?;
        ensure!(
            oracle.win_rate > 0.99,
            "{profile}: oracle win rate {:.4}",
            oracle.win_rate
        );
        lines.push(format!(
            "{profile} adv={:+.4} oracle={:.3}",
            stat.advantage, oracle.win_rate
        ));
    }
    Ok(lines.join(", "))
}

fn execution_equality() -> Outcome {
    let mut events = 0;
    let mut diverged = 0;
    let mut with_hidden = 0;
    for i in 0..50u64 {
        let profile = ChannelProfile::ALL[i as usize % 3];
        let script = BoundaryScript::random(profile, 20, 900 + i);
        let unified = run_execution_game(&script, IoMode::Unified).map_err(|e| e.to_string())?;
        ensure!(
            unified.equal,
            "script {i} diverged in unified mode at {:?}",
            unified.divergence
        );
        events += unified.events;
        let legacy =
            run_execution_game(&script, IoMode::LegacyInterrupt).map_err(|e| e.to_string())?;
        if script.has_hidden_io() {
            with_hidden += 1;
            ensure!(!legacy.equal, "script {i}: legacy mode hid its interrupts");
            diverged += 1;
        }
    }
    Ok(format!("50 scripts equal ({events} events); legacy diverged on {diverged}/{with_hidden} with hidden I/O"))
}

fn disclosure_verification() -> Outcome {
    let mut checked = 0;
    for hidden in [false, true] {
        for (p, profile) in ChannelProfile::ALL.into_iter().enumerate() {
            let (mut a, mut b) = pair(profile, hidden, 300 + 10 * p as u64 + u64::from(hidden));
            let auth_sid = a.disclose(DIS).map_err(|e| e.to_string())?.sessions[0].session_id;
            if hidden {
                a.secure()
                    .unwrap()
                    .queue_hidden(BOB, b"the package is at the station")
                    .unwrap();
                b.secure()
                    .unwrap()
                    .queue_hidden(ALICE, b"understood")
                    .unwrap();
            }
            let (mut wa, mut wb) = pipe(auth_sid);
            for i in 0..20 {
                wa.send(
                    &a.enclave_seal(BOB, format!("alice {i}").as_bytes())
                        .unwrap(),
                )
                .unwrap();
                b.enclave_open(ALICE, &wb.recv().unwrap()).unwrap();
                wb.send(
                    &b.enclave_seal(ALICE, format!("bob {i}").as_bytes())
                        .unwrap(),
                )
                .unwrap();
                a.enclave_open(BOB, &wa.recv().unwrap()).unwrap();
            }
            if hidden {
                ensure!(
                    b.secure().unwrap().read_inbox().messages.len() == 1,
                    "{profile}: hidden message lost"
                );
            }
            let bundle = a.disclose(DIS).map_err(|e| e.to_string())?;
            let wire = wa.snapshot();
            let v = verify_disclosure(&bundle, &wire);
            ensure!(
                v.all_match() && v.matched == 40 && v.checked == 40 && v.count_mismatch.is_empty(),
                "{profile} hidden={hidden}: {v:?}"
            );
            checked += v.checked;

            let mut forged = bundle.clone();
            let idx = 17;
            forged.sessions[0].records[idx].body = b"a different story".to_vec();
            let f = verify_disclosure(&forged, &wire);
            ensure!(
                f.mismatches.len() == 1 && f.mismatches[0].index == idx && f.matched == 39,
                "{profile} hidden={hidden}: forgery verdict {f:?}"
            );
        }
    }
    Ok(format!(
        "{checked}/{checked} indices match in both modes; forged record flagged"
    ))
}

fn false_positive_bound() -> Outcome {
    const COINS: u64 = 10_000_000;
    let profile = ChannelProfile::TelegramLike;
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .clamp(1, 16) as u64;
    let per = COINS.div_ceil(workers);
    let results: Vec<(u64, u64, u64)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(0xf00d + w);
                    let mut hmk = [0u8; 16];
                    rng.fill_bytes(&mut hmk);
                    let key = HiddenKey::new(Key16::from_array(hmk));
                    let mut st = ReassemblyState::new(profile);
                    let (start, end) = (w * per, ((w + 1) * per).min(COINS));
                    let mut frames = 0;
                    let mut buf = vec![0u8; profile.coin_width()];
                    for seq in start..end {
                        rng.fill_bytes(&mut buf);
                        let coin = RandomCoin::new(profile, buf.clone()).unwrap();
                        if st.ingest_coin(seq, &coin, &key).is_some() {
                            frames += 1;
                        }
                        while st.take_ready().is_some() {
                            frames += 1;
                        }
                    }
                    (end - start, frames, st.false_positives())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let coins: u64 = results.iter().map(|r| r.0).sum();
    let frames: u64 = results.iter().map(|r| r.1).sum();
    let candidates: u64 = results.iter().map(|r| r.2).sum();
    ensure!(coins == COINS, "only {coins} coins scanned");
    ensure!(
        frames == 0,
        "{frames} spurious frames from {coins} random coins"
    );
    Ok(format!(
        "{coins} coins, 0 frames, {candidates} rejected header candidates"
    ))
}

fn contact_store() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("store.bin");
    let mut c = EnclaveConfig::new(ChannelProfile::TelegramLike, Key32::from_array([3; 32]));
    c.work_factor = WorkFactor::FAST;
    c.store_path = Some(path.clone());
    let mut e = Enclave::new(c, Box::new(SeededEntropy::new(77)));
    e.setup_ceremony(PUB, HID, DIS, "contacts").unwrap();
    e.verify_password(HID).unwrap();
    let size = |e: &mut Enclave| -> Result<u64, String> {
        e.store_save().map_err(|e| e.to_string())?;
        Ok(std::fs::metadata(&path).map_err(|e| e.to_string())?.len())
    };
    let mut sizes = vec![size(&mut e)?];
    for i in 0..3000u64 {
        let mut sc = e.secure().unwrap();
        let secret = sc.generate_contact_secret().map_err(|e| e.to_string())?;
        sc.add_contact(i.to_be_bytes(), &secret)
            .map_err(|e| format!("contact {i}: {e}"))?;
        if i == 0 {
            sizes.push(size(&mut e)?);
        }
    }
    ensure!(e.secure().unwrap().contact_count() == 3000, "contact count");
    sizes.push(size(&mut e)?);
    ensure!(
        sizes
            .iter()
            .all(|&s| s == 1 << 20 && s as usize == BLOB_LEN),
        "blob sizes {sizes:?}"
    );
    let dup = e
        .secure()
        .unwrap()
        .add_contact(0u64.to_be_bytes(), &[0; 128]);
    ensure!(
        dup == Err(BoundaryError::DuplicateContact),
        "duplicate accepted: {dup:?}"
    );
    Ok(format!(
        "3000 contacts, blob {} octets at 0, 1 and 3000 records",
        sizes[0]
    ))
}

fn wire_format_invariance() -> Outcome {
    // Exhaustive destructuring: a new envelope field will not compile here.
    let shape = |e: &PublicEnvelope| {
        let PublicEnvelope {
            auth_key_id,
            msg_key,
            ciphertext,
        } = e;
        auth_key_id.len() + msg_key.len() + 4 + ciphertext.len()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e55);
    let mut entropy = SeededEntropy::new(5);
    let mut samples = 0;
    for profile in ChannelProfile::ALL {
        let auth = AuthKey::generate(&mut entropy).unwrap();
        let key = HiddenKey::new(Key16::from_array([9; 16]));
        let mut queue = ChunkQueue::empty(profile);
        let n = if profile == ChannelProfile::BriarLike {
            3334
        } else {
            3333
        };
        for seq in 0..n {
            if queue.is_empty() {
                let mut msg = vec![0u8; rng.gen_range(1..=4096)];
                rng.fill_bytes(&mut msg);
                queue
                    .enqueue(&key, &msg, &mut entropy)
                    .map_err(|e| e.to_string())?;
            }
            let mut body = vec![0u8; rng.gen_range(1..=4096)];
            rng.fill_bytes(&mut body);
            let pt = PublicPlaintext {
                session_id: [1; 8],
                seq_no: seq,
                body,
            };
            let random = RandomCoin::random(profile, &mut entropy).unwrap();
            let carried = queue.next_coin(&mut entropy).unwrap();
            let plain = seal_public(profile, &auth, &pt, &random, &mut entropy)
                .map_err(|e| e.to_string())?;
            let injected = seal_public(profile, &auth, &pt, &carried, &mut entropy)
                .map_err(|e| e.to_string())?;
            let (x, y) = (&plain.envelope, &injected.envelope);
            ensure!(
                x.to_bytes().len() == y.to_bytes().len()
                    && shape(x) == shape(y)
                    && shape(x) == x.wire_len(),
                "{profile} seq {seq}: lengths {} vs {}",
                x.to_bytes().len(),
                y.to_bytes().len()
            );
            ensure!(x.auth_key_id == y.auth_key_id, "routing id depends on mode");
            for s in [&plain, &injected] {
                let opened = open_public(profile, &auth, &s.envelope).map_err(|e| e.to_string())?;
                ensure!(opened.plaintext == pt, "round trip");
            }
            samples += 1;
        }
    }
    Ok(format!(
        "{samples} samples, envelope fields (id, msg_key, ciphertext) only"
    ))
}

fn signal_metadata() -> Outcome {
    let profile = ChannelProfile::SignalLike;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5167);
    let mut entropy = SeededEntropy::new(6);
    let key = Key16::from_array([4; 16]);
    let hmk = HiddenKey::new(Key16::from_array([8; 16]));
    let mut queue = ChunkQueue::empty(profile);
    for i in 0..10_000 {
        if queue.is_empty() {
            queue
                .enqueue(&hmk, &[0x42; 300], &mut entropy)
                .map_err(|e| e.to_string())?;
        }
        let mut meta = [0u8; METADATA_LEN];
        rng.fill_bytes(&mut meta);
        let random = RandomCoin::random(profile, &mut entropy).unwrap();
        let chunk = queue.next_coin(&mut entropy).unwrap();
        ensure!(chunk.len() == 16 && random.len() == 16, "iv width");
        let (a, ops_random) = measure(|| seal_metadata(&key, &meta, &random));
        let (b, ops_chunk) = measure(|| seal_metadata(&key, &meta, &chunk));
        let (a, b) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?);
        ensure!(
            ops_random == ops_chunk,
            "sample {i}: {ops_random:?} vs {ops_chunk:?}"
        );
        ensure!(
            a.iv == random.as_bytes() && b.iv == chunk.as_bytes(),
            "iv not carried"
        );
        ensure!(
            open_metadata(&key, &a) == meta && open_metadata(&key, &b) == meta,
            "sample {i}: round trip"
        );
    }
    ensure!(
        seal_metadata(
            &key,
            &[0; 32],
            &RandomCoin::random(profile, &mut entropy).unwrap()
        )
        .is_err(),
        "32-octet metadata accepted"
    );
    Ok("10000 samples, identical op counts for random and chunk IVs".into())
}

fn seal_work_equality() -> Outcome {
    let mut summary = Vec::new();
    for (p, profile) in ChannelProfile::ALL.into_iter().enumerate() {
        let seed = 500 + 10 * p as u64;
        let (mut plain, _) = pair(profile, false, seed);
        let (mut hidden, _) = pair(profile, true, seed);
        hidden
            .secure()
            .unwrap()
            .queue_hidden(BOB, &[7; 2000])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut total = None;
        for i in 0..200 {
            let mut body = vec![0u8; rng.gen_range(1..1000)];
            rng.fill_bytes(&mut body);
            let (_, x) = measure(|| plain.enclave_seal(BOB, &body).unwrap());
            let (_, y) = measure(|| hidden.enclave_seal(BOB, &body).unwrap());
            ensure!(x == y, "{profile} seal {i}: {x:?} vs {y:?}");
            total.get_or_insert(x);
        }
        ensure!(
            hidden.secure().unwrap().covers_needed(BOB) == 0,
            "{profile}: chunks not consumed"
        );

        let key = HiddenKey::new(Key16::from_array([1; 16]));
        let mut e = SeededEntropy::new(seed);
        let mut empty = ChunkQueue::empty(profile);
        let mut full = encode_hidden(&key, &[1; 64], profile, &mut e).unwrap();
        let (_, x) = measure(|| empty.next_coin(&mut e).unwrap());
        let (_, y) = measure(|| full.next_coin(&mut e).unwrap());
        ensure!(x == y, "{profile} next_coin: {x:?} vs {y:?}");
        if let Some(t) = total {
            summary.push(format!(
                "{profile} {} blocks/{} hashes",
                t.block_encryptions, t.sha256_calls
            ));
        }
    }
    Ok(format!(
        "200 seals per profile equal: {}",
        summary.join(", ")
    ))
}

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion {
            name: "bandwidth law",
            limit: secs(1),
            run: bandwidth_law,
        },
        Criterion {
            name: "hidden round-trip",
            limit: secs(30),
            run: hidden_round_trip,
        },
        Criterion {
            name: "transcript game",
            limit: secs(60),
            run: transcript_game,
        },
        Criterion {
            name: "execution-transcript equality",
            limit: secs(30),
            run: execution_equality,
        },
        Criterion {
            name: "disclosure verification",
            limit: secs(10),
            run: disclosure_verification,
        },
        Criterion {
            name: "false-positive bound",
            limit: secs(60),
            run: false_positive_bound,
        },
        Criterion {
            name: "contact store",
            limit: secs(10),
            run: contact_store,
        },
        Criterion {
            name: "wire-format invariance",
            limit: secs(60),
            run: wire_format_invariance,
        },
        Criterion {
            name: "signal metadata",
            limit: secs(60),
            run: signal_metadata,
        },
        Criterion {
            name: "seal work equality",
            limit: secs(60),
            run: seal_work_equality,
        },
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for c in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = t.elapsed();
        let result = match result {
            Ok(_) if took > c.limit => Err(format!("took {took:.2?}, limit {:?}", c.limit)),
            r => r,
        };
        match result {
            Ok(detail) => println!("PASS {} [{took:.2?} / {:?}] {detail}", c.name, c.limit),
            Err(why) => {
                failed += 1;
                println!("FAIL {} [{took:.2?} / {:?}] {why}", c.name, c.limit);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
