"""sin3: run SPARQL queries as N3 rules.

The pipeline: parse a SPARQL query into its algebra, compile it into exactly
one N3 rule, and execute that rule by forward saturation or backward proof
over RDF data. A naive reference evaluator for the same algebra serves as
the oracle for differential testing of the translation.
"""

from .algebra import (
    Arith,
    Bgp,
    Bound,
    Comparison,
    Conjunction,
    Construct,
    Disjunction,
    Exists,
    FALSE,
    Filter,
    Join,
    LeftJoin,
    Minus,
    Negation,
    NotExists,
    Query,
    Select,
    TRUE,
    Union,
)
from .backward import ProofConfig, ProofResult, prove
from .errors import (
    CapExceededError,
    ParseError,
    Sin3Error,
    UnstratifiableError,
    UnsupportedFeatureError,
    ValidationError,
)
from .evaluator import (
    SolutionMapping,
    compatible,
    evaluate_filter,
    evaluate_pattern,
    evaluate_query,
    fixpoint_construct,
    join,
    minus_compatible,
    union,
)
from .forward import EngineConfig, FactBase, answer_select, match_premise, saturate, stratify
from .n3 import GraphTerm, ListTerm, N3Document, N3Rule, parse_document, serialize_document
from .rdfio import load_graph_files, parse_ntriples, parse_turtle, serialize_ntriples
from .scoping import ordered_scope, relabel, scope_vars, vars_in
from .sparql import parse_query, validate_query
from .terms import BlankNode, Graph, Iri, Literal, Triple, UNBOUND, Variable
from .translate import (
    runtime_rules,
    translate_filter,
    translate_head,
    translate_pattern,
    translate_query,
)

__version__ = "0.1.0"
