//! Experiment runner: `run <config>`, `list [filter]`, `export <table> <csv>`.

use neumann_green::config::parse_config;
use neumann_green::elliptic::EllipticNeumannTable;
use neumann_green::green::GreenTable;
use neumann_green::runner::{find_bundled, list_bundled, run_config};

fn usage() -> ! {
    eprintln!(
        "usage:\n  ngreen run <config-file-or-bundled-name>\n  ngreen list [filter]\n  ngreen export <table-file> <out.csv>\n\nThe output root honors the NGREEN_OUT environment variable."
    );
    std::process::exit(2);
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first().map(String::as_str) {
        Some("run") => {
            let Some(target) = args.get(1) else { usage() };
            let (label, text) = match find_bundled(target) {
                Some(b) => (b.name.to_string(), b.text.to_string()),
                None => {
                    let text = match std::fs::read_to_string(target) {
                        Ok(t) => t,
                        Err(e) => {
                            eprintln!("cannot read config '{target}': {e}");
                            std::process::exit(2);
                        }
                    };
                    let label = std::path::Path::new(target)
                        .file_stem()
                        .map(|s| s.to_string_lossy().to_string())
                        .unwrap_or_else(|| "run".to_string());
                    (label, text)
                }
            };
            let cfg = match parse_config(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    std::process::exit(2);
                }
            };
            match run_config(&cfg, &label) {
                Ok((report, dir)) => {
                    print!("{}", report.to_text());
                    println!("report written to {}", dir.display());
                    std::process::exit(if report.all_pass() { 0 } else { 1 });
                }
                Err(e) => {
                    eprintln!("{e}");
                    std::process::exit(1);
                }
            }
        }
        Some("list") => {
            let filter = args.get(1).map(String::as_str).unwrap_or("");
            print!("{}", list_bundled(filter));
        }
        Some("export") => {
            let (Some(table_path), Some(csv_path)) = (args.get(1), args.get(2)) else { usage() };
            let bytes = match std::fs::read(table_path) {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("cannot read table '{table_path}': {e}");
                    std::process::exit(2);
                }
            };
            let csv = if bytes.starts_with(b"ngt") {
                GreenTable::from_bytes(&bytes).map(|t| t.export_csv())
            } else if bytes.starts_with(b"nge") {
                EllipticNeumannTable::from_bytes(&bytes).map(|t| t.export_csv())
            } else {
                Err(neumann_green::Error::InvalidInput("unrecognized table format".into()))
            };
            match csv {
                Ok(csv) => {
                    if let Err(e) = std::fs::write(csv_path, csv) {
                        eprintln!("cannot write '{csv_path}': {e}");
                        std::process::exit(2);
                    }
                    println!("wrote {csv_path}");
                }
                Err(e) => {
                    eprintln!("{e}");
                    std::process::exit(1);
                }
            }
        }
        _ => usage(),
    }
}
