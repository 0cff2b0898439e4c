//! Behavioural typechecking: a module that respects its protocols and a
//! gallery of modules that do not.
//!
//! ```sh
//! cargo run --example typecheck
//! ```

use std::path::Path;

use sessft::parser::{parse_module, SourceFile};
use sessft::typecheck::check_module;

fn load(kind: &str, name: &str) -> (sessft::Module, String) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join(kind)
        .join(name);
    let contents = std::fs::read_to_string(&path).expect("corpus file exists");
    let file = path.display().to_string();
    (
        parse_module(&SourceFile::new(file.clone(), contents)).expect("corpus parses"),
        file,
    )
}

fn main() {
    let (calc, file) = load("well_typed", "calc.exst");
    match check_module(&calc) {
        Ok(()) => println!("{file}: ok"),
        Err(ds) => {
            for d in ds {
                println!("{}", d.render(&file));
            }
        }
    }

    println!("\nand what rejection looks like:");
    for name in [
        "wrong_label.exst",
        "wrong_addressee.exst",
        "missing_branch.exst",
        "residual.exst",
        "shadow_dual.exst",
    ] {
        let (module, file) = load("ill_typed", name);
        let errs = check_module(&module).expect_err("ill-typed corpus");
        for d in errs {
            println!("  {}", d.render(&file));
        }
    }
}
