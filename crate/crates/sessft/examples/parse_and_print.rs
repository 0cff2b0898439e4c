//! Parse a module, inspect what the parser produced, and print it back.
//!
//! ```sh
//! cargo run --example parse_and_print
//! ```

use sessft::parser::{parse_module, print_module, print_session, SourceFile};

const SOURCE: &str = r#"
defmodule Greeter do
  @session "X = ?name(atom).!greeting(atom).X"
  @spec greet(pid) :: atom
  def greet(pid) do
    receive do
      {:name, n} ->
        send(pid, {:greeting, :hello})
    end
    greet(pid)
  end

  @dual "X"
  @spec visitor(pid) :: atom
  def visitor(pid) do
    send(pid, {:name, :alice})
    receive do
      {:greeting, g} ->
        g
    end
    visitor(pid)
  end
end
"#;

fn main() {
    let module = parse_module(&SourceFile::new("greeter.exst", SOURCE)).expect("parses");

    println!("module {} with {} definitions:", module.name, module.defs.len());
    for def in &module.defs {
        let session = def
            .session
            .as_ref()
            .map(|ann| print_session(ann.session()))
            .unwrap_or_else(|| "(private)".to_string());
        println!("  {:10} session: {session}", def.id.to_string());
    }

    println!("\ncanonical form:\n");
    print!("{}", print_module(&module));

    // Parse errors come back as diagnostics with positions.
    let broken = "defmodule Broken do\n  def f(pid do\nend\n";
    let errs = parse_module(&SourceFile::new("broken.exst", broken)).unwrap_err();
    println!("\na broken module reports:");
    for d in errs {
        println!("  {}", d.render("broken.exst"));
    }
}
