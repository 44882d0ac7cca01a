//! Full evaluation of the bundled configuration, rendered as markdown.
use abcd_piml::cli::{cmd_evaluate, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::path::Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic.cfg"));
    let cfg = RunConfig::load(Some(path), &[("regressors".into(), "ridge, gpr".into())])?;
    let eval = cmd_evaluate(&cfg)?;
    print!("{}", eval.report.to_markdown());
    Ok(())
}
