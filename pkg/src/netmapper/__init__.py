"""netmapper: iterative network scanning with versioned results.

Scan modules feed a shared dataset over repeated iterations, gateway
analysis links nodes into a topology, and every iteration is committed
to a version store that supports diff and rollback.  A bundled network
simulator stands in for live scanning in tests and demos.
"""

__version__ = "0.1.0"
