//! Initial machine state files.
//!
//! ```text
//! # comment
//! %rbx = 0x1000
//! mem 0x1000 = 42
//! zero 0x2000 16        # 16 zeroed words
//! ```

use anyhow::{bail, Context, Result};
use codefusion::asm::Register;
use codefusion::tracer::InitState;

fn number(s: &str) -> Result<u64> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.with_context(|| format!("bad number `{s}`"))
}

fn register(s: &str) -> Result<Register> {
    let name = s.trim().strip_prefix('%').with_context(|| format!("expected a register like %rax, got `{s}`"))?;
    Register::ALL.into_iter().find(|r| r.name() == name).with_context(|| format!("unknown register `{s}`"))
}

pub fn parse_init_state(text: &str) -> Result<InitState> {
    let mut init = InitState::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let ctx = || format!("init line {}: `{raw}`", n + 1);
        let words: Vec<&str> = line.split_whitespace().collect();
        init = match words.as_slice() {
            ["mem", addr, "=", value] => init.with_word(number(addr).with_context(ctx)?, number(value).with_context(ctx)?),
            ["zero", base, count] => init.with_zeroed(number(base).with_context(ctx)?, number(count).with_context(ctx)?),
            _ => match line.split_once('=') {
                Some((r, v)) if r.trim().starts_with('%') => {
                    init.with_reg(register(r).with_context(ctx)?, number(v).with_context(ctx)?)
                }
                _ => bail!("{}: expected `%reg = v`, `mem ADDR = v` or `zero BASE WORDS`", ctx()),
            },
        };
    }
    Ok(init)
}
