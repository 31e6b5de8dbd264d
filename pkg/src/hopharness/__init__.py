"""Harness for probing multi-hop reasoning in generative QA models.

Submodules:

- ``corpus``: dataset, lexicon, and retrieval-run loading
- ``decompose``: two-hop question decomposition and placeholder handling
- ``sparql``: SPARQL-subset parser, hop splitting, rendering, execution
- ``kg`` / ``synthkg``: triple store and synthetic world generation
- ``context``: pseudo-gold / negative context assembly
- ``modelio``: generation backends (HTTP client and builtin reference models)
- ``evaluation``: exact match, probing modes, confusion and consistency
- ``traingen``: training-corpus emission for the zero-shot settings
- ``cli``: command-line entry point
"""

__version__ = "0.1.0"
