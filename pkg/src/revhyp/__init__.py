"""Log-Sobolev and reverse hypercontractive inequalities on finite reversible Markov semigroups."""

__version__ = "0.1.0"
