//! Command-line front end: `construct`, `verify` and `emit`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::descriptor::{format_seed, parse_descriptor, parse_seed, sha256_hex, SystemArtifact, SystemDescriptor};
use crate::emit::{emit_figure1, emit_frame_operator, emit_generators, emit_tile, parse_matrix, parse_pair, EmitFile};
use crate::error::{Error, Result};
use crate::filters::DEFAULT_SEED;
use crate::frame::FrameSystem;
use crate::tiles::TileSpec;
use crate::verify::{verify_system, Suite, VerifyOptions, DEFAULT_TOLERANCE, DEFAULT_TRIALS};

#[derive(Parser, Debug)]
#[command(name = "tightframe", version, about = "Construct and verify tight wavelet frames on LCA groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteArg {
    Uep,
    Refinement,
    Fiber,
    Telescope,
    Parseval,
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Target {
    Generators,
    Figure1,
    Tile,
    FrameOperator,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a system from a JSON descriptor and write the system artifact.
    Construct {
        #[arg(long)]
        descriptor: PathBuf,
        /// Artifact path; defaults to the descriptor's `out` field, then system.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run verification suites on a system artifact or descriptor.
    Verify {
        #[arg(long, conflicts_with = "descriptor", required_unless_present = "descriptor")]
        system: Option<PathBuf>,
        #[arg(long)]
        descriptor: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
        /// Grid size on continuous duals.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        /// Hexadecimal seed.
        #[arg(long)]
        seed: Option<String>,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// Report path; without it the JSON report goes to stdout and the summary to stderr.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write CSV data.
    Emit {
        #[arg(value_enum)]
        target: Target,
        #[arg(long, conflicts_with = "descriptor")]
        system: Option<PathBuf>,
        #[arg(long)]
        descriptor: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Tile dilation matrix as a,b;c,d.
        #[arg(long, allow_hyphen_values = true)]
        matrix: Option<String>,
        /// Tile digit as x,y.
        #[arg(long, allow_hyphen_values = true)]
        eta: Option<String>,
        #[arg(long)]
        iterations: Option<u32>,
        #[arg(long)]
        seed: Option<String>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

/// A loaded system with the hash and seed that label its outputs.
struct Loaded {
    system: FrameSystem,
    hash: String,
    seed: u64,
}

fn load(system: Option<&Path>, descriptor: Option<&Path>) -> Result<Loaded> {
    match (system, descriptor) {
        (Some(p), _) => {
            let art = SystemArtifact::parse(&read(p)?)?;
            Ok(Loaded { system: art.to_system()?, hash: art.descriptor_sha256.clone(), seed: art.seed_value()? })
        }
        (None, Some(p)) => {
            let text = read(p)?;
            let d = parse_descriptor(&text)?;
            Ok(Loaded { system: d.build()?, hash: sha256_hex(text.as_bytes()), seed: d.seed_value()? })
        }
        (None, None) => Err(Error::Input("either --system or --descriptor is required".into())),
    }
}

fn summary(system: &FrameSystem, art: &SystemArtifact) -> String {
    let mut s = format!(
        "system {} on {} with levels {}..{}\n",
        system.family.label(),
        system.group().variant_name(),
        system.k0,
        system.k1
    );
    for lv in &art.levels {
        s.push_str(&format!("level {}: d={} rho={}\n", lv.k, lv.d, lv.rho));
    }
    s.push_str(&format!("generator families: {}\n", art.generators.len()));
    for g in &art.generators {
        match g.support {
            Some([a, b]) => s.push_str(&format!("  {} support [{a}, {b}]\n", g.name)),
            None => s.push_str(&format!("  {} support on the frequency side\n", g.name)),
        }
    }
    s
}

fn construct(descriptor: &Path, out: Option<PathBuf>) -> Result<i32> {
    let text = read(descriptor)?;
    let d: SystemDescriptor = parse_descriptor(&text)?;
    let system = d.build()?;
    let art = SystemArtifact::from_system(&system, &d, &sha256_hex(text.as_bytes()))?;
    let path = out.or_else(|| d.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("system.json"));
    write(&path, &art.to_json())?;
    print!("{}", summary(&system, &art));
    println!("wrote {}", path.display());
    Ok(0)
}

fn write_files(dir: &Path, files: &[EmitFile]) -> Result<()> {
    for f in files {
        write(&dir.join(&f.name), &f.contents)?;
        println!("wrote {}", dir.join(&f.name).display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Construct { descriptor, out } => construct(&descriptor, out),
        Command::Verify { system, descriptor, suite, samples, trials, seed, tolerance, out } => {
            let loaded = load(system.as_deref(), descriptor.as_deref())?;
            let seed = match seed {
                Some(s) => parse_seed(&s)?,
                None => loaded.seed,
            };
            let suite = match suite {
                SuiteArg::Uep => Suite::Uep,
                SuiteArg::Refinement => Suite::Refinement,
                SuiteArg::Fiber => Suite::Fiber,
                SuiteArg::Telescope => Suite::Telescope,
                SuiteArg::Parseval => Suite::Parseval,
                SuiteArg::All => Suite::All,
            };
            let opts = VerifyOptions { suite, samples, trials, seed, tolerance };
            let report = verify_system(&loaded.system, &opts, &loaded.hash)?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            match out {
                Some(p) => {
                    write(&p, &json)?;
                    print!("{}", report.human_summary());
                }
                None => {
                    eprint!("{}", report.human_summary());
                    print!("{json}");
                }
            }
            Ok(report.exit_code())
        }
        Command::Emit { target, system, descriptor, out, matrix, eta, iterations, seed } => {
            let seed_flag = seed.as_deref().map(parse_seed).transpose()?;
            if let Target::Tile = target {
                let a = parse_matrix(matrix.as_deref().unwrap_or("1,-1;1,1"))?;
                let e = parse_pair(eta.as_deref().unwrap_or("1,0"))?;
                let spec = TileSpec::new(a, e)?;
                let r = iterations.unwrap_or(12);
                let f = emit_tile(&spec, r, &format_seed(seed_flag.unwrap_or(DEFAULT_SEED)))?;
                write_files(&out, &[f])?;
                return Ok(0);
            }
            let loaded = load(system.as_deref(), descriptor.as_deref())?;
            let seed = format_seed(seed_flag.unwrap_or(loaded.seed));
            let files = match target {
                Target::Generators => emit_generators(&loaded.system, &loaded.hash, &seed)?,
                Target::Figure1 => emit_figure1(&loaded.system, &loaded.hash, &seed)?,
                Target::FrameOperator => vec![emit_frame_operator(&loaded.system, &loaded.hash, &seed)?],
                Target::Tile => unreachable!("handled above"),
            };
            write_files(&out, &files)?;
            Ok(0)
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
