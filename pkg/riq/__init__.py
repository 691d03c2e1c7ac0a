# RIQ package: quad indexing with pattern-vector filters and filtered SPARQL evaluation

__version__ = "1.0.0"
