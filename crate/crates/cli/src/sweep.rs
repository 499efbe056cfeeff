//! Array-size sweep lists: explicit (`4,16,64`) or elided (`4,8,...,512`).
//!
//! An elided list continues geometrically when the first two terms have an
//! integer ratio that reaches the last term, otherwise arithmetically.

pub fn parse(text: &str) -> Result<Vec<usize>, String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let num = |s: &str| s.parse::<usize>().map_err(|_| format!("bad sweep entry `{s}`"));
    let out = match parts.iter().position(|p| *p == "...") {
        None => parts.iter().map(|p| num(p)).collect::<Result<Vec<_>, _>>()?,
        Some(2) if parts.len() == 4 => expand(num(parts[0])?, num(parts[1])?, num(parts[3])?)?,
        Some(_) => return Err(format!("`{text}`: use `a,b,...,c` to elide a sweep")),
    };
    if out.is_empty() || out.contains(&0) {
        return Err(format!("`{text}`: sweep entries must be positive"));
    }
    Ok(out)
}

fn expand(a: usize, b: usize, last: usize) -> Result<Vec<usize>, String> {
    if a == 0 || b <= a || last < b {
        return Err(format!("`{a},{b},...,{last}` is not increasing"));
    }
    if b.is_multiple_of(a) {
        let ratio = b / a;
        let mut v = vec![a];
        while *v.last().unwrap() < last {
            v.push(v.last().unwrap() * ratio);
        }
        if *v.last().unwrap() == last {
            return Ok(v);
        }
    }
    let step = b - a;
    if (last - a).is_multiple_of(step) {
        return Ok((a..=last).step_by(step).collect());
    }
    Err(format!("`{a},{b},...,{last}` does not reach its last term"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_and_elided() {
        assert_eq!(parse("4,16,64").unwrap(), vec![4, 16, 64]);
        assert_eq!(parse("4,8,...,512").unwrap(), vec![4, 8, 16, 32, 64, 128, 256, 512]);
        assert_eq!(parse("4, 8, ..., 20").unwrap(), vec![4, 8, 12, 16, 20]);
        assert_eq!(parse("10").unwrap(), vec![10]);
    }

    #[test]
    fn rejects_bad_lists() {
        for bad in ["", "4,x", "0,4", "4,...,8", "8,4,...,2", "4,8,...,13"] {
            assert!(parse(bad).is_err(), "{bad}");
        }
    }
}
