//! Line-oriented text formats for profiles, matchings and graphs.
//!
//! `#` starts a comment anywhere on a line. Tokens are whitespace-separated;
//! `(` and `)` are standalone tokens delimiting a tie-group. Writers emit a
//! canonical form (agents in index order, single spaces) so equal values
//! serialize identically and `parse(write(x)) == x`.
//!
//! Profile grammar:
//! ```text
//! kind marriage | kind roommates
//! sideA a1 a2 ...          (marriage only)
//! sideB b1 b2 ...          (marriage only)
//! <name> : tok ( tok tok ) tok ...
//! ```
//! Matching files hold one `x y` pair of agent names per line. Graph files
//! start with an `n m` header followed by one `u v` edge per line.

use std::collections::HashMap;

use thiserror::Error;

use crate::graph::{Graph, GraphError};
use crate::model::{
    AgentId, Kind, Matching, MatchingError, PreferenceProfile, ProfileError, Side,
};
use crate::reductions::GadgetSpec;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown agent name {name:?}")]
    UnknownAgent { line: usize, name: String },
    #[error("invalid profile: {0}")]
    Profile(#[from] ProfileError),
    #[error("invalid matching: {0}")]
    Matching(#[from] MatchingError),
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        msg: msg.into(),
    }
}

/// Numbered, comment-stripped, non-blank lines.
fn content_lines(text: &str) -> Vec<(usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let body = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = body.split_whitespace().collect();
            if tokens.is_empty() {
                None
            } else {
                Some((i + 1, tokens))
            }
        })
        .collect()
}

fn check_name(line: usize, tok: &str) -> Result<(), ParseError> {
    if tok.contains(['(', ')', ':', '#']) {
        return Err(syntax(line, format!("invalid agent name {tok:?}")));
    }
    Ok(())
}

/// Splits `name : entries...`; returns (name, entry tokens).
fn split_pref_line<'a>(line: usize, tokens: &[&'a str]) -> Result<(&'a str, Vec<&'a str>), ParseError> {
    if tokens.len() < 2 || tokens[1] != ":" {
        return Err(syntax(line, "expected `<name> : ...`"));
    }
    check_name(line, tokens[0])?;
    Ok((tokens[0], tokens[2..].to_vec()))
}

/// Parses entry tokens into tie-groups of agent indices.
fn parse_groups(
    line: usize,
    tokens: &[&str],
    index: &HashMap<String, usize>,
) -> Result<Vec<Vec<usize>>, ParseError> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut open: Option<Vec<usize>> = None;
    for &tok in tokens {
        match tok {
            "(" => {
                if open.is_some() {
                    return Err(syntax(line, "nested `(`"));
                }
                open = Some(Vec::new());
            }
            ")" => match open.take() {
                Some(group) if group.is_empty() => {
                    return Err(syntax(line, "empty tie-group `( )`"))
                }
                Some(group) => groups.push(group),
                None => return Err(syntax(line, "`)` without matching `(`")),
            },
            name => {
                check_name(line, name)?;
                let id = *index.get(name).ok_or_else(|| ParseError::UnknownAgent {
                    line,
                    name: name.to_string(),
                })?;
                match &mut open {
                    Some(group) => group.push(id),
                    None => groups.push(vec![id]),
                }
            }
        }
    }
    if open.is_some() {
        return Err(syntax(line, "unbalanced `(`"));
    }
    Ok(groups)
}

pub fn parse_profile(text: &str) -> Result<PreferenceProfile, ParseError> {
    let lines = content_lines(text);
    let mut it = lines.iter();

    let (kind_line, kind_tokens) = it
        .next()
        .ok_or_else(|| syntax(0, "empty input, expected `kind` line"))?;
    let kind = match kind_tokens.as_slice() {
        ["kind", "marriage"] => Kind::Marriage,
        ["kind", "roommates"] => Kind::Roommates,
        _ => {
            return Err(syntax(
                *kind_line,
                "expected `kind marriage` or `kind roommates`",
            ))
        }
    };

    let mut names: Vec<String> = Vec::new();
    let mut sides: Option<Vec<Side>> = None;
    let rest: Vec<&(usize, Vec<&str>)> = it.collect();
    let mut pref_lines = rest.as_slice();

    if kind == Kind::Marriage {
        if rest.len() < 2 || rest[0].1.first() != Some(&"sideA") || rest[1].1.first() != Some(&"sideB")
        {
            return Err(syntax(
                *kind_line,
                "marriage profiles need `sideA ...` and `sideB ...` lines",
            ));
        }
        let mut tags = Vec::new();
        for (side_tokens, tag, line) in [
            (&rest[0].1, Side::A, rest[0].0),
            (&rest[1].1, Side::B, rest[1].0),
        ] {
            for &tok in &side_tokens[1..] {
                check_name(line, tok)?;
                names.push(tok.to_string());
                tags.push(tag);
            }
        }
        sides = Some(tags);
        pref_lines = &rest[2..];
    } else {
        for &&(line, ref tokens) in pref_lines {
            let (name, _) = split_pref_line(line, tokens)?;
            names.push(name.to_string());
        }
    }

    let index: HashMap<String, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    if index.len() != names.len() {
        let dup = names
            .iter()
            .find(|n| names.iter().filter(|m| m == n).count() > 1)
            .cloned()
            .unwrap_or_default();
        return Err(ParseError::Profile(ProfileError::DuplicateName(dup)));
    }

    let mut raw_lists: Vec<Option<Vec<Vec<usize>>>> = vec![None; names.len()];
    for &&(line, ref tokens) in pref_lines {
        let (name, entries) = split_pref_line(line, tokens)?;
        let owner = *index.get(name).ok_or_else(|| ParseError::UnknownAgent {
            line,
            name: name.to_string(),
        })?;
        if raw_lists[owner].is_some() {
            return Err(syntax(line, format!("second preference line for {name:?}")));
        }
        raw_lists[owner] = Some(parse_groups(line, &entries, &index)?);
    }
    let raw_lists: Vec<Vec<Vec<usize>>> = raw_lists
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| syntax(0, format!("missing preference line for {:?}", names[i]))))
        .collect::<Result<_, _>>()?;

    Ok(PreferenceProfile::new(kind, names, sides, raw_lists)?)
}

pub fn write_profile(profile: &PreferenceProfile) -> String {
    let mut out = String::new();
    match profile.kind() {
        Kind::Marriage => {
            out.push_str("kind marriage\n");
            for (tag, label) in [(Side::A, "sideA"), (Side::B, "sideB")] {
                out.push_str(label);
                for a in profile.agents() {
                    if profile.side(a) == Some(tag) {
                        out.push(' ');
                        out.push_str(profile.name(a));
                    }
                }
                out.push('\n');
            }
        }
        Kind::Roommates => out.push_str("kind roommates\n"),
    }
    for a in profile.agents() {
        out.push_str(profile.name(a));
        out.push_str(" :");
        for group in profile.list(a).groups() {
            if group.len() == 1 {
                out.push(' ');
                out.push_str(profile.name(group[0]));
            } else {
                out.push_str(" (");
                for &m in group {
                    out.push(' ');
                    out.push_str(profile.name(m));
                }
                out.push_str(" )");
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_matching(text: &str, profile: &PreferenceProfile) -> Result<Matching, ParseError> {
    let mut pairs = Vec::new();
    for (line, tokens) in content_lines(text) {
        let [x, y] = tokens.as_slice() else {
            return Err(syntax(line, "expected `<name> <name>`"));
        };
        let a = profile.index_of(x).ok_or_else(|| ParseError::UnknownAgent {
            line,
            name: x.to_string(),
        })?;
        let b = profile.index_of(y).ok_or_else(|| ParseError::UnknownAgent {
            line,
            name: y.to_string(),
        })?;
        pairs.push((a, b));
    }
    Ok(Matching::new(profile, &pairs)?)
}

pub fn write_matching(profile: &PreferenceProfile, m: &Matching) -> String {
    let mut out = String::new();
    for (a, b) in m.pairs() {
        out.push_str(profile.name(a));
        out.push(' ');
        out.push_str(profile.name(b));
        out.push('\n');
    }
    out
}

pub fn parse_graph(text: &str) -> Result<Graph, ParseError> {
    let lines = content_lines(text);
    let mut it = lines.iter();
    let &(header_line, ref header) = it
        .next()
        .ok_or_else(|| syntax(0, "empty input, expected `n m` header"))?;
    let [n_tok, m_tok] = header.as_slice() else {
        return Err(syntax(header_line, "expected `n m` header"));
    };
    let n: usize = n_tok
        .parse()
        .map_err(|_| syntax(header_line, format!("bad vertex count {n_tok:?}")))?;
    let m: usize = m_tok
        .parse()
        .map_err(|_| syntax(header_line, format!("bad edge count {m_tok:?}")))?;
    let mut edges = Vec::with_capacity(m);
    for &(line, ref tokens) in it {
        let [u_tok, v_tok] = tokens.as_slice() else {
            return Err(syntax(line, "expected `u v` edge"));
        };
        let u: usize = u_tok
            .parse()
            .map_err(|_| syntax(line, format!("bad vertex {u_tok:?}")))?;
        let v: usize = v_tok
            .parse()
            .map_err(|_| syntax(line, format!("bad vertex {v_tok:?}")))?;
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(syntax(
            header_line,
            format!("header says {m} edges, found {}", edges.len()),
        ));
    }
    Ok(Graph::new(n, edges)?)
}

pub fn write_graph(g: &Graph) -> String {
    let mut out = format!("{} {}\n", g.n(), g.m());
    for &(u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

/// Gadget candidate files for `check gadget`:
/// ```text
/// ltarget 2
/// attach x1 x2
/// x1 : host y1
/// y1 : x1
/// ...
/// ```
/// Internal lists are strict; the token `host` stands for the host agent.
pub fn parse_gadget(text: &str) -> Result<GadgetSpec, ParseError> {
    use crate::reductions::GadgetRef;

    let lines = content_lines(text);
    let mut it = lines.iter();

    let &(l1, ref t1) = it.next().ok_or_else(|| syntax(0, "empty gadget file"))?;
    let l_target: usize = match t1.as_slice() {
        ["ltarget", v] => v
            .parse()
            .map_err(|_| syntax(l1, format!("bad ltarget {v:?}")))?,
        _ => return Err(syntax(l1, "expected `ltarget N`")),
    };

    let &(l2, ref t2) = it
        .next()
        .ok_or_else(|| syntax(l1, "expected `attach ...` line"))?;
    if t2.first() != Some(&"attach") {
        return Err(syntax(l2, "expected `attach name...`"));
    }
    let attach_names: Vec<&str> = t2[1..].to_vec();

    let pref_lines: Vec<&(usize, Vec<&str>)> = it.collect();
    let mut names = Vec::new();
    for &&(line, ref tokens) in &pref_lines {
        let (name, _) = split_pref_line(line, tokens)?;
        if name == "host" {
            return Err(syntax(line, "`host` is reserved"));
        }
        names.push(name.to_string());
    }
    let index: HashMap<String, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();

    let mut lists = Vec::new();
    for &&(line, ref tokens) in &pref_lines {
        let (_, entries) = split_pref_line(line, tokens)?;
        let mut list = Vec::new();
        for tok in entries {
            if tok == "host" {
                list.push(GadgetRef::Host);
            } else {
                let id = *index.get(tok).ok_or_else(|| ParseError::UnknownAgent {
                    line,
                    name: tok.to_string(),
                })?;
                list.push(GadgetRef::Member(id));
            }
        }
        lists.push(list);
    }

    let mut attachment = Vec::new();
    for name in attach_names {
        let id = *index.get(name).ok_or_else(|| ParseError::UnknownAgent {
            line: l2,
            name: name.to_string(),
        })?;
        attachment.push(id);
    }

    GadgetSpec::new(l_target, lists, attachment)
        .map_err(|e| syntax(l2, format!("invalid gadget: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_agent_roommates_round_trip() {
        let text = "kind roommates\na : b\nb : a\n";
        let p = parse_profile(text).unwrap();
        assert_eq!(p.n(), 2);
        assert_eq!(p.edges(), &[(0, 1)]);
        assert_eq!(write_profile(&p), text);
        assert_eq!(parse_profile(&write_profile(&p)).unwrap(), p);
    }

    #[test]
    fn tie_group_rank() {
        let text = "kind marriage\nsideA a1\nsideB b1 b2 b3\na1 : b2 ( b1 b3 )\nb1 : a1\nb2 : a1\nb3 : a1\n";
        let p = parse_profile(text).unwrap();
        let a1 = p.index_of("a1").unwrap();
        let b1 = p.index_of("b1").unwrap();
        let b3 = p.index_of("b3").unwrap();
        assert_eq!(p.rank(a1, b1).unwrap(), 1);
        assert_eq!(p.rank(a1, b3).unwrap(), 1);
    }

    #[test]
    fn unbalanced_paren_names_line() {
        let text = "kind roommates\na : ( b\nb : a\n";
        let err = parse_profile(text).unwrap_err();
        assert_eq!(
            err,
            ParseError::Syntax {
                line: 2,
                msg: "unbalanced `(`".into()
            }
        );
    }

    #[test]
    fn unknown_agent_named() {
        let text = "kind roommates\na : z\n";
        match parse_profile(text).unwrap_err() {
            ParseError::UnknownAgent { line: 2, name } => assert_eq!(name, "z"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "# header\nkind roommates\n\na : b # best\nb : a\n";
        assert_eq!(parse_profile(text).unwrap().n(), 2);
    }

    #[test]
    fn matching_file() {
        let p = parse_profile("kind roommates\na : b\nb : a\n").unwrap();
        let m = parse_matching("a b\n", &p).unwrap();
        assert_eq!(m.size(), 1);
        assert_eq!(write_matching(&p, &m), "a b\n");
        assert!(parse_matching("", &p).unwrap().pairs().is_empty());
    }

    #[test]
    fn graph_file_triangle() {
        let g = parse_graph("3 3\n0 1\n1 2\n0 2\n").unwrap();
        assert_eq!(g, Graph::complete(3));
        assert_eq!(parse_graph(&write_graph(&g)).unwrap(), g);
    }

    #[test]
    fn graph_header_mismatch() {
        assert!(matches!(
            parse_graph("3 2\n0 1\n"),
            Err(ParseError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn marriage_round_trip() {
        let text = "kind marriage\nsideA m1 m2\nsideB w1 w2\nm1 : w1 w2\nm2 : w1\nw1 : ( m1 m2 )\nw2 : m1\n";
        let p = parse_profile(text).unwrap();
        assert_eq!(write_profile(&p), text);
    }

    #[test]
    fn validation_surfaced() {
        let text = "kind roommates\na : b\nb :\n";
        assert_eq!(
            parse_profile(text).unwrap_err(),
            ParseError::Profile(ProfileError::NonMutualAcceptability { x: 0, y: 1 })
        );
    }
}
