use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use coinveil::client::Client;
use coinveil::device::{peer_id, read_auth_key, write_auth_key};
use coinveil::schema::{NormalCommand, Response, SecureCommand};
use coinveil::{Device, DeviceConfig};
use coinveil_core::crypto::WorkFactor;
use coinveil_core::harness::{
    run_execution_game, run_transcript_game, Adversary, BoundaryScript, GameScript,
};
use coinveil_core::hidden::cover_count;
use coinveil_core::{ChannelProfile, IoMode};

#[derive(Parser)]
#[command(
    name = "coinveil",
    version,
    about = "Deniable messaging over the random coins of an E2EE channel"
)]
struct Cli {
    /// telegram | signal | briar
    #[arg(long, global = true, default_value = "telegram")]
    profile: ChannelProfile,
    /// Seed for reproducible runs. Makes enclave entropy deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Persistent enclave store (exactly 1 MiB).
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Gateway address to serve on, or to talk to.
    #[arg(long, global = true, default_value = "127.0.0.1:7878")]
    listen: String,
    /// Request hidden input by observable interrupts.
    #[arg(long, global = true)]
    legacy_interrupt_mode: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the device and its local JSON/WebSocket service.
    Serve(ServeArgs),
    /// Write a fresh shared auth key (hex) for two devices.
    Keygen {
        out: PathBuf,
    },
    /// Setup ceremony: three passwords and the enclave watermark.
    Init {
        #[arg(long)]
        public_password: String,
        #[arg(long)]
        hidden_password: String,
        #[arg(long)]
        disclosure_password: String,
        #[arg(long)]
        watermark: String,
    },
    Unlock {
        #[arg(long)]
        password: String,
    },
    #[command(subcommand)]
    Contact(ContactCmd),
    /// Send a public message to the peer.
    Send {
        body: String,
    },
    #[command(subcommand)]
    Hidden(HiddenCmd),
    /// Release public keys and per-message metadata, with verification
    /// against this device's wire transcript.
    Disclose {
        #[arg(long)]
        password: String,
    },
    Shutdown,
    Status,
    #[command(subcommand)]
    Game(GameCmd),
    /// Cover messages needed for an n-octet hidden message.
    Bandwidth {
        n: usize,
        profile: ChannelProfile,
    },
}

#[derive(Args)]
struct ServeArgs {
    /// Accept the peer link on this address.
    #[arg(long, conflicts_with = "peer_connect")]
    peer_listen: Option<String>,
    /// Dial the peer at this address.
    #[arg(long)]
    peer_connect: Option<String>,
    /// Shared auth key file written by `keygen`.
    #[arg(long)]
    auth_key: Option<PathBuf>,
    /// Name of the remote party.
    #[arg(long, default_value = "peer")]
    peer_id: String,
    /// Cheap password hashing for demos and tests.
    #[arg(long)]
    fast_kdf: bool,
}

#[derive(Subcommand)]
enum ContactCmd {
    /// Generate a 128-octet contact secret to share out of band.
    Secret,
    /// Add the peer as hidden contact with a shared secret.
    Add {
        #[arg(long)]
        secret: String,
        #[arg(long)]
        contact_id: Option<String>,
    },
}

#[derive(Subcommand)]
enum HiddenCmd {
    Send { msg: String },
    Inbox,
    Covers,
}

#[derive(Subcommand)]
enum GameCmd {
    Transcript {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// stat | oracle | constant | coin
        #[arg(long, default_value = "stat")]
        adversary: String,
    },
    Execution {
        #[arg(long, default_value_t = 50)]
        scripts: usize,
    },
}

fn print(resp: Response) -> ExitCode {
    println!(
        "{}",
        serde_json::to_string_pretty(&resp).expect("serializable")
    );
    if resp.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let client = Client::new(format!("http://{}", cli.listen));
    let normal = |c| match client.normal(c) {
        Ok(r) => print(r),
        Err(e) => fail(e),
    };
    let secure = |c| match client.secure(c) {
        Ok(r) => print(r),
        Err(e) => fail(e),
    };
    let io_mode = if cli.legacy_interrupt_mode {
        IoMode::LegacyInterrupt
    } else {
        IoMode::Unified
    };

    match cli.cmd {
        Cmd::Serve(args) => serve(&cli.listen, cli.profile, cli.seed, cli.store, io_mode, args),
        Cmd::Keygen { out } => match write_auth_key(&out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        },
        Cmd::Init {
            public_password,
            hidden_password,
            disclosure_password,
            watermark,
        } => normal(NormalCommand::Init {
            public_password,
            hidden_password,
            disclosure_password,
            watermark,
        }),
        Cmd::Unlock { password } => normal(NormalCommand::Unlock { password }),
        Cmd::Contact(ContactCmd::Secret) => secure(SecureCommand::ContactSecret),
        Cmd::Contact(ContactCmd::Add { secret, contact_id }) => {
            secure(SecureCommand::ContactAdd { secret, contact_id })
        }
        Cmd::Send { body } => normal(NormalCommand::Send { body }),
        Cmd::Hidden(HiddenCmd::Send { msg }) => secure(SecureCommand::HiddenSend { msg }),
        Cmd::Hidden(HiddenCmd::Inbox) => secure(SecureCommand::HiddenInbox),
        Cmd::Hidden(HiddenCmd::Covers) => secure(SecureCommand::CoversNeeded),
        Cmd::Disclose { password } => normal(NormalCommand::Disclose { password }),
        Cmd::Shutdown => normal(NormalCommand::Shutdown),
        Cmd::Status => normal(NormalCommand::Status),
        Cmd::Game(g) => game(g, cli.profile, cli.seed.unwrap_or(0), io_mode),
        Cmd::Bandwidth { n, profile } => match cover_count(n, profile) {
            Ok(c) => {
                println!("{c}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}

fn game(g: GameCmd, profile: ChannelProfile, seed: u64, io: IoMode) -> ExitCode {
    match g {
        GameCmd::Transcript { trials, adversary } => {
            let adv = match adversary.as_str() {
                "stat" => Adversary::stat_battery(),
                "oracle" => Adversary::HmkOracle,
                "constant" => Adversary::Constant { guess: false },
                "coin" => Adversary::CoinFlip,
                other => return fail(format!("unknown adversary {other}")),
            };
            let script = GameScript::random(profile, 64, 200, seed);
            match run_transcript_game(&script, adv, trials) {
                Ok(e) => {
                    println!(
                        "game=transcript profile={} adversary={adversary} trials={} wins={} advantage={:+.4} ci=[{:+.4},{:+.4}]",
                        profile, e.trials, e.wins, e.advantage, e.ci_low, e.ci_high
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        GameCmd::Execution { scripts } => {
            let mut diverged = 0;
            for i in 0..scripts as u64 {
                let s = BoundaryScript::random(profile, 20, seed.wrapping_add(i));
                match run_execution_game(&s, io) {
                    Ok(v) => {
                        let at = v.divergence.map_or("-".into(), |d| d.index.to_string());
                        println!(
                            "script={i} events={} equal={} divergence={at}",
                            v.events, v.equal
                        );
                        diverged += !v.equal as usize;
                    }
                    Err(e) => return fail(e),
                }
            }
            println!("game=execution io_mode={io:?} scripts={scripts} diverged={diverged}");
            ExitCode::SUCCESS
        }
    }
}

fn serve(
    listen: &str,
    profile: ChannelProfile,
    seed: Option<u64>,
    store: Option<PathBuf>,
    io_mode: IoMode,
    args: ServeArgs,
) -> ExitCode {
    let mut cfg = DeviceConfig::new(profile);
    cfg.seed = seed;
    cfg.store = store;
    cfg.io_mode = io_mode;
    cfg.peer_id = peer_id(&args.peer_id);
    if args.fast_kdf {
        cfg.work_factor = WorkFactor::FAST;
    }
    if let Some(p) = &args.auth_key {
        match read_auth_key(p) {
            Ok(k) => cfg.auth_key = Some(k),
            Err(e) => return fail(e),
        }
    }
    let dev = match Device::boot(cfg) {
        Ok(d) => d,
        Err(e) => return fail(e),
    };
    if let Some(addr) = &args.peer_listen {
        match dev.listen_peer(addr) {
            Ok(a) => eprintln!("peer link listening on {a}"),
            Err(e) => return fail(e),
        }
    }
    if let Some(addr) = args.peer_connect {
        dev.connect_peer(addr, Duration::from_secs(30));
    }

    let rt = match tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
    {
        Ok(rt) => rt,
        Err(e) => return fail(e),
    };
    rt.block_on(async move {
        let (addr, fut) = match coinveil::server::bind(dev, listen).await {
            Ok(x) => x,
            Err(e) => return fail(format!("bind {listen}: {e}")),
        };
        println!("gateway listening on http://{addr}");
        match fut.await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        }
    })
}
