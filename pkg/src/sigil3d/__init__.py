"""Collaborative versioning service for 3D content.

Versioned maps and blocks, per-block edit leases, a moderation pipeline,
content-addressed asset storage, an HTTP/JSON API, and the ``sigil`` edit
client.
"""

__version__ = "0.1.0"
