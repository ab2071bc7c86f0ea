//! Concrete comprehension syntax: parser and printer.

mod parse;
mod print;

pub use parse::{parse_arc, ParseError};
pub use print::{
    name as print_name, print_arc, print_formula, print_join_tree, print_predicate, print_term,
    value as print_value,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alt::*;

    const EQ1: &str = "{ Q(A) | exists r in R, s in S [ Q.A = r.A and r.B = s.B and s.C = 0 ] }";

    #[test]
    fn parses_simple_query() {
        let p = parse_arc(EQ1).unwrap();
        let Main::Query(c) = &p.main else { panic!() };
        assert_eq!(c.head, HeadSpec::new("Q", &["A"]));
        let Formula::Quantified(q) = &c.body else {
            panic!()
        };
        assert_eq!(q.bindings.len(), 2);
        assert_eq!(q.body.conjuncts().len(), 3);
    }

    #[test]
    fn parses_grouping() {
        let p =
            parse_arc("{ Q(A,sm) | exists r in R, group(r.A) [ Q.A = r.A and Q.sm = sum(r.B) ] }")
                .unwrap();
        let Main::Query(c) = &p.main else { panic!() };
        let Formula::Quantified(q) = &c.body else {
            panic!()
        };
        assert_eq!(
            q.grouping.as_ref().unwrap().keys,
            vec![AttributeRef::new("r", "A")]
        );
    }

    #[test]
    fn dangling_and_points_at_operator() {
        let src = "{ Q(A) | exists r in R [ Q.A = r.A and ] }";
        let e = parse_arc(src).unwrap_err();
        assert_eq!(&src[e.span.start..e.span.end], "and");
        assert_eq!(e.expected, vec!["formula".to_string()]);
    }

    #[test]
    fn true_sentence_prints_as_true() {
        let p = parse_arc("true").unwrap();
        assert_eq!(print_arc(&p), "true\n");
    }

    #[test]
    fn round_trip_keeps_structure() {
        for src in [
            EQ1,
            "{ Q(A) | exists r in R, s in S, left(r, inner(lit 11 as v, s)) [ Q.A = r.m and r.h = v.val ] }",
            "def A := { A(s, t) | exists p in P [ A.s = p.s and A.t = p.t ] or exists p in P, a2 in A [ A.s = p.s and p.t = a2.s and A.t = a2.t ] }\n{ Q(s, t) | exists a in A [ Q.s = a.s and Q.t = a.t ] }",
            "not exists r in R [ exists s in S, group() [ r.id = s.id and r.q > count(s.d) ] ]",
            "{ Q(x) | exists r in R [ Q.x = (r.a - r.b) * -2 and not (r.a = 1 or r.b is not null) ] }",
            "{ Q(x) | exists f in ext \"*\" [ Q.x = f.out and f.\"$1\" = 2 and f.$2 = 'it''s' ] }",
            "{ Q(x) | exists r in R [ (Q.x = r.a or Q.x = r.b) and r.c = 1.5 ] }",
            "abstract def S := { S(left, right) | not exists l in L [ l.d = S.left ] }\n{ Q(a) | exists s in S [ Q.a = s.left and s.right = 1 ] }",
        ] {
            let p = parse_arc(src).unwrap_or_else(|e| panic!("{src}: {e}"));
            let printed = print_arc(&p);
            let q = parse_arc(&printed).unwrap_or_else(|e| panic!("{printed}: {e}"));
            assert_eq!(p, q, "{printed}");
            assert_eq!(printed, print_arc(&q));
        }
    }

    #[test]
    fn not_exists_differs_from_negated_exists() {
        let a = parse_arc("not exists r in R [ true ]").unwrap();
        let b = parse_arc("not (exists r in R [ true ])").unwrap();
        assert_ne!(a, b);
        assert_eq!(parse_arc(&print_arc(&b)).unwrap(), b);
    }

    #[test]
    fn keywords_are_case_insensitive() {
        let a = parse_arc("EXISTS r IN R [ r.A = 1 AND r.B IS NULL ]").unwrap();
        let b = parse_arc("exists r in R [ r.A = 1 and r.B is null ]").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn definition_name_must_match_head() {
        assert!(parse_arc("def A := { B(x) | true } true").is_err());
    }
}
