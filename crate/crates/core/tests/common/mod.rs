#![allow(dead_code)]

use treevasion::satgen::CnfFormula;

/// Naive DPLL with unit propagation; independent of the tree reduction.
pub fn dpll_satisfiable(f: &CnfFormula) -> bool {
    let clauses: Vec<Vec<i32>> = f.clauses.iter().map(|c| c.to_vec()).collect();
    let mut assign = vec![0i8; f.n_vars + 1];
    dpll(&clauses, &mut assign)
}

fn lit_state(lit: i32, assign: &[i8]) -> i8 {
    let v = assign[lit.unsigned_abs() as usize];
    if lit > 0 {
        v
    } else {
        -v
    }
}

fn dpll(clauses: &[Vec<i32>], assign: &mut Vec<i8>) -> bool {
    let saved = assign.clone();
    loop {
        let mut unit = None;
        for c in clauses {
            let mut open = Vec::new();
            let mut sat = false;
            for &l in c {
                match lit_state(l, assign) {
                    1 => sat = true,
                    0 => open.push(l),
                    _ => {}
                }
            }
            if sat {
                continue;
            }
            match open.as_slice() {
                [] => {
                    *assign = saved;
                    return false;
                }
                [l] => {
                    unit = Some(*l);
                    break;
                }
                _ => {}
            }
        }
        match unit {
            Some(l) => assign[l.unsigned_abs() as usize] = if l > 0 { 1 } else { -1 },
            None => break,
        }
    }
    let free = (1..assign.len()).find(|&v| assign[v] == 0);
    let Some(v) = free else {
        return true;
    };
    for val in [1, -1] {
        assign[v] = val;
        if dpll(clauses, assign) {
            return true;
        }
        assign[v] = 0;
    }
    *assign = saved;
    false
}

/// Exhaustive satisfiability for small formulas.
pub fn brute_satisfiable(f: &CnfFormula) -> bool {
    (0..1u64 << f.n_vars).any(|bits| {
        let a: Vec<bool> = (0..f.n_vars).map(|i| bits >> i & 1 == 1).collect();
        f.eval(&a)
    })
}
