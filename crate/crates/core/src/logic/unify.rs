//! Syntactic unification over public terms.

use super::term::{Substitution, Term};

/// Most general unifier of `a` and `b` extending `s`, or `None` when the
/// terms clash. Always performs the occurs check.
pub fn unify(a: &Term, b: &Term, s: &Substitution) -> Option<Substitution> {
    let mut out = s.clone();
    unify_into(a, b, &mut out).then_some(out)
}

fn unify_into(a: &Term, b: &Term, s: &mut Substitution) -> bool {
    let a = s.apply(a);
    let b = s.apply(b);
    match (&a, &b) {
        (Term::Var(x), Term::Var(y)) if x == y => true,
        (Term::Var(x), t) | (t, Term::Var(x)) => {
            if t.occurs(*x) {
                return false;
            }
            s.bind(*x, t.clone());
            true
        }
        (Term::Sym(x), Term::Sym(y)) => x == y,
        (Term::Int(x), Term::Int(y)) => x == y,
        (Term::Compound(f, xs), Term::Compound(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| unify_into(x, y, s))
        }
        (Term::List(xs, xt), Term::List(ys, yt)) => unify_lists(xs, xt.as_deref(), ys, yt.as_deref(), s),
        _ => false,
    }
}

fn unify_lists(
    xs: &[Term],
    xt: Option<&Term>,
    ys: &[Term],
    yt: Option<&Term>,
    s: &mut Substitution,
) -> bool {
    let shared = xs.len().min(ys.len());
    for (x, y) in xs[..shared].iter().zip(&ys[..shared]) {
        if !unify_into(x, y, s) {
            return false;
        }
    }
    let rest = |items: &[Term], tail: Option<&Term>| {
        Term::list(items[shared..].to_vec(), tail.cloned())
    };
    match (xs.len() > shared, ys.len() > shared) {
        // both exhausted: the tails must agree
        (false, false) => match (xt, yt) {
            (None, None) => true,
            (Some(x), Some(y)) => unify_into(x, y, s),
            (Some(t), None) | (None, Some(t)) => unify_into(t, &Term::List(Vec::new(), None), s),
        },
        (true, false) => match yt {
            Some(t) => unify_into(t, &rest(xs, xt), s),
            None => false,
        },
        (false, true) => match xt {
            Some(t) => unify_into(t, &rest(ys, yt), s),
            None => false,
        },
        (true, true) => unreachable!(),
    }
}
