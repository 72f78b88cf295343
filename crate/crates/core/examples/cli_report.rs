//! Builds a run configuration in code and prints the report the CLI would.

use confsub::cli::config::RunConfig;
use confsub::cli::run::run;

fn main() {
    let text = "\
surface = clifford_torus
grid.count = 48
tasks = analyze, willmore, isotropy
seeds = 7
";
    let cfg = RunConfig::parse(text).expect("config");
    let out = run(&cfg);
    print!("{}", out.rendered());
    std::process::exit(out.exit.code());
}
