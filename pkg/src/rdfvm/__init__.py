"""Named-graph quad store, the Neno language and compiler, an RDF virtual machine, and compute farms."""

__version__ = "0.1.0"
