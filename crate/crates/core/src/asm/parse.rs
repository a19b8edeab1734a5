use std::collections::BTreeMap;

use thiserror::Error;

use super::{InstrKind, Instruction, MemRef, Mnemonic, Operand, Program, Register, Scale};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown mnemonic `{name}`")]
    UnknownMnemonic { line: usize, name: String },
    #[error("line {line}: unresolvable label `{name}`")]
    UnresolvedLabel { line: usize, name: String },
    #[error("line {line}: label `{name}` defined twice")]
    DuplicateLabel { line: usize, name: String },
    #[error("line {line}: control falls off the end of the program")]
    FallsOffEnd { line: usize },
}

enum PendingTarget {
    Label(String),
    Index(usize),
}

struct Pending {
    line: usize,
    mnemonic: Mnemonic,
    operands: Vec<Operand>,
    kind: InstrKind,
    target: Option<PendingTarget>,
}

/// Parse dialect source text into a [`Program`].
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut labels = BTreeMap::new();
    let mut pending: Vec<Pending> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let mut rest = raw.split(';').next().unwrap_or("").trim();
        if rest.is_empty() {
            continue;
        }
        if let Some((head, tail)) = rest.split_once(':') {
            let name = head.trim();
            if is_identifier(name) {
                if labels.insert(name.to_string(), pending.len()).is_some() {
                    return Err(ParseError::DuplicateLabel { line, name: name.to_string() });
                }
                rest = tail.trim();
                if rest.is_empty() {
                    continue;
                }
            }
        }
        pending.push(parse_instruction(line, rest)?);
    }

    let n = pending.len();
    let mut instructions = Vec::with_capacity(n);
    for (index, p) in pending.into_iter().enumerate() {
        let target = match p.target {
            None => None,
            Some(PendingTarget::Index(t)) if t < n => Some(t),
            Some(PendingTarget::Index(t)) => {
                return Err(ParseError::UnresolvedLabel { line: p.line, name: t.to_string() })
            }
            Some(PendingTarget::Label(name)) => match labels.get(&name) {
                Some(&t) if t < n => Some(t),
                _ => return Err(ParseError::UnresolvedLabel { line: p.line, name }),
            },
        };
        instructions.push((p.line, Instruction {
            index,
            mnemonic: p.mnemonic,
            operands: p.operands,
            kind: p.kind,
            target,
        }));
    }
    if let Some((line, last)) = instructions.last() {
        if !matches!(last.kind, InstrKind::Halt | InstrKind::Jump) {
            return Err(ParseError::FallsOffEnd { line: *line });
        }
    }
    Ok(Program { instructions: instructions.into_iter().map(|(_, i)| i).collect(), labels })
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn parse_instruction(line: usize, text: &str) -> Result<Pending, ParseError> {
    let syntax = |msg: String| ParseError::Syntax { line, msg };
    let (name, args) = match text.find(char::is_whitespace) {
        Some(pos) => (&text[..pos], text[pos..].trim()),
        None => (text, ""),
    };
    let mnemonic: Mnemonic = name
        .parse()
        .map_err(|_| ParseError::UnknownMnemonic { line, name: name.to_string() })?;

    if mnemonic == Mnemonic::Jmp || mnemonic.is_cond_branch() {
        if args.is_empty() || args.contains(|c: char| c == ',' || c.is_whitespace()) {
            return Err(syntax(format!("`{name}` takes exactly one target")));
        }
        let target = if args.chars().all(|c| c.is_ascii_digit()) {
            PendingTarget::Index(args.parse().map_err(|_| syntax(format!("bad target `{args}`")))?)
        } else if is_identifier(args) {
            PendingTarget::Label(args.to_string())
        } else {
            return Err(syntax(format!("bad target `{args}`")));
        };
        let kind = if mnemonic == Mnemonic::Jmp { InstrKind::Jump } else { InstrKind::CondBranch };
        return Ok(Pending { line, mnemonic, operands: vec![], kind, target: Some(target) });
    }

    let operands = split_operands(args)
        .into_iter()
        .map(|s| parse_operand(s).map_err(|msg| syntax(msg)))
        .collect::<Result<Vec<_>, _>>()?;

    use Operand::{Imm, Mem, Reg};
    let kind = match (mnemonic, operands.as_slice()) {
        (Mnemonic::Halt, []) => InstrKind::Halt,
        (Mnemonic::Mov, [Mem(_), Reg(_)]) => InstrKind::MoveLoad,
        (Mnemonic::Mov, [Reg(_) | Imm(_), Mem(_)]) => InstrKind::MoveStore,
        (Mnemonic::Mov, [Reg(_) | Imm(_), Reg(_)]) => InstrKind::MoveReg,
        (Mnemonic::Add | Mnemonic::Sub | Mnemonic::Imul, [Reg(_) | Imm(_), Reg(_)]) => InstrKind::Arith,
        (Mnemonic::Inc, [Reg(_)]) => InstrKind::Arith,
        (Mnemonic::Cmp, [Reg(_) | Imm(_), Reg(_)]) => InstrKind::Compare,
        (m, ops) => {
            return Err(syntax(format!(
                "invalid operands for `{}` ({} given; memory operands are only allowed in `mov`)",
                m.name(),
                ops.len()
            )))
        }
    };
    Ok(Pending { line, mnemonic, operands, kind, target: None })
}

/// Split on commas that are not inside parentheses.
fn split_operands(args: &str) -> Vec<&str> {
    if args.trim().is_empty() {
        return vec![];
    }
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in args.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(args[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(args[start..].trim());
    out
}

pub(crate) fn parse_int(s: &str) -> Option<i128> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let v = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()?
    } else {
        if body.is_empty() || !body.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        body.parse::<u64>().ok()?
    } as i128;
    Some(if neg { -v } else { v })
}

fn parse_operand(s: &str) -> Result<Operand, String> {
    if let Some(imm) = s.strip_prefix('$') {
        let v = parse_int(imm).ok_or_else(|| format!("bad immediate `{s}`"))?;
        if v < i64::MIN as i128 {
            return Err(format!("immediate out of range `{s}`"));
        }
        return Ok(Operand::Imm(v as u64));
    }
    if s.starts_with('%') {
        return s
            .parse::<Register>()
            .map(Operand::Reg)
            .map_err(|_| format!("unknown register `{s}`"));
    }
    if let Some(open) = s.find('(') {
        if !s.ends_with(')') {
            return Err(format!("unterminated memory operand `{s}`"));
        }
        let disp = s[..open].trim();
        let offset = if disp.is_empty() {
            0
        } else {
            let v = parse_int(disp).ok_or_else(|| format!("bad displacement `{disp}`"))?;
            i64::try_from(v).map_err(|_| format!("displacement out of range `{disp}`"))?
        };
        let inner: Vec<&str> = s[open + 1..s.len() - 1].split(',').map(str::trim).collect();
        let reg = |t: &str| -> Result<Option<Register>, String> {
            if t.is_empty() {
                Ok(None)
            } else {
                t.parse::<Register>().map(Some).map_err(|_| format!("unknown register `{t}`"))
            }
        };
        let (base, index, scale) = match inner.as_slice() {
            [b] => (reg(b)?, None, Scale::One),
            [b, i] => (reg(b)?, reg(i)?, Scale::One),
            [b, i, sc] => {
                let f = parse_int(sc).ok_or_else(|| format!("bad scale `{sc}`"))?;
                let scale = u64::try_from(f)
                    .ok()
                    .and_then(Scale::from_factor)
                    .ok_or_else(|| format!("scale must be 1, 2, 4 or 8, got `{sc}`"))?;
                (reg(b)?, reg(i)?, scale)
            }
            _ => return Err(format!("malformed memory operand `{s}`")),
        };
        if base.is_none() && index.is_none() {
            return Err(format!("memory operand needs a base or index register `{s}`"));
        }
        return Ok(Operand::Mem(MemRef { offset, base, index, scale }));
    }
    Err(format!("unrecognised operand `{s}`"))
}
