"""Pattern-formula model checking for finite automata with outputs.

The toolkit decides structural properties of NFAs, word transducers and
integer sum-automata.  A property is written as a pattern formula — an
existential block of path bindings plus a constraint — compiled into an
acceptor over convolutions of path tuples, and decided by emptiness
checking; satisfied formulas come back with a re-verified witness.  A
catalog maps classical subclasses (ambiguity degrees, functionality,
k-valuedness, determinisability, sequentiality degrees) onto their
forbidden patterns, and a brute-force oracle provides the reference
semantics everything is tested against.
"""

from .automata import Automaton, Path, parse_automaton, render_automaton
from .catalog import (
    PROPERTIES,
    PropertyVerdict,
    UniversalVerdict,
    check_property,
    check_universal,
    cross_check_formula,
)
from .emptiness import SearchConfig, Verdict
from .errors import (
    ConfigError,
    FragmentError,
    ParseError,
    PatlogError,
    ResourceLimitError,
    ValidationError,
    WitnessSoundnessError,
)
from .logic import PatternFormula, check_fragment, parse_formula, render_formula
from .pipeline import CheckResult, check_formula
from .semantics import OracleResult, eval_pattern

__version__ = "0.1.0"

__all__ = [
    "Automaton",
    "CheckResult",
    "ConfigError",
    "FragmentError",
    "OracleResult",
    "PROPERTIES",
    "ParseError",
    "Path",
    "PatlogError",
    "PatternFormula",
    "PropertyVerdict",
    "ResourceLimitError",
    "SearchConfig",
    "UniversalVerdict",
    "ValidationError",
    "Verdict",
    "WitnessSoundnessError",
    "check_formula",
    "check_fragment",
    "check_property",
    "check_universal",
    "cross_check_formula",
    "eval_pattern",
    "parse_automaton",
    "parse_formula",
    "render_automaton",
    "render_formula",
    "__version__",
]
