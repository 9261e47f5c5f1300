//! Bundled example programs.

use crate::parser::{parse_program, ParseError};
use crate::syntax::Program;

#[derive(Clone, Copy, Debug)]
pub struct Entry {
    pub name: &'static str,
    pub source: &'static str,
    /// Part of the set of delegation programs whose forward elimination
    /// must be bisimilar to the original.
    pub delegation: bool,
}

impl Entry {
    pub fn parse(&self) -> Result<Program, Vec<ParseError>> {
        parse_program(self.source)
    }
}

macro_rules! entry {
    ($name:literal, $delegation:expr) => {
        Entry {
            name: $name,
            source: include_str!(concat!("../corpus/", $name, ".def")),
            delegation: $delegation,
        }
    };
}

pub const PROGRAMS: &[Entry] = &[
    entry!("delegate", false),
    entry!("delegate_forward", true),
    entry!("list_sum", true),
    entry!("chain4", true),
    entry!("mixed", true),
    entry!("branching", true),
    entry!("mutual", true),
    entry!("global_writer", true),
    entry!("sync_forward", true),
    entry!("ackermann", true),
    entry!("checked", true),
    entry!("cycle", false),
    entry!("mutual_wait", false),
    entry!("sync_forward_wait", false),
    entry!("sync_forward_flow", false),
];

/// Variants of `checked` that differ observably from its forward
/// elimination.
pub const MUTANTS: &[Entry] = &[
    entry!("mutants/changed_constant", false),
    entry!("mutants/dropped_delegation", false),
    entry!("mutants/swapped_branch", false),
];

pub fn get(name: &str) -> Option<&'static Entry> {
    PROGRAMS.iter().chain(MUTANTS).find(|e| e.name == name)
}

/// Source of the recursive summation over `n, n-1, ..., 1`. The main task
/// reads a chain of `n` delegating futures ending in one that returns the
/// sum; `forward` selects between `forward*` and `return` for delegation.
pub fn list_sum_source(n: u32, forward: bool) -> String {
    let delegate = if forward { "forward* y" } else { "return y" };
    format!(
        "fun Flow[int] sum(int n, int acc) {{
  bool done;
  int a;
  int m;
  Flow[int] y;
  done = n == 0;
  if done {{
    return acc
  }} else {{
    a = acc + n;
    m = n - 1;
    y = !sum(m, a);
    {delegate}
  }}
}}
{{
  Flow[int] x;
  int r;
  x = !sum({n}, 0);
  r = get* x;
  return r
}}
"
    )
}
