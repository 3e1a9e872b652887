"""fieldshare: fine-grained, integrity-preserving sharing of IoT measurement data.

Signed JSON measurement documents can be selectively disclosed field by field
with zero-knowledge proofs; access is governed by capability credentials
issued over OAuth 2.0 and enforced by an HTTP proxy.
"""

__version__ = "0.1.0"
