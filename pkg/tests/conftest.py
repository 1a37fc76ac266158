import numpy as np
import pytest

from ellipcr.signature import Signature

# reference signatures used throughout: flat model, one strict block with a
# quadratic tail, two distinct strict blocks, and a strict block alone
S1 = Signature.parse("n=2")
S2 = Signature.parse("m=2;n=2,1")
S3 = Signature.parse("m=2,3;n=2,2,1")
S4 = Signature.parse("m=2;n=2,0")
# equal-type strict blocks so block permutations are non-trivial
S5 = Signature.parse("m=2,2;n=2,2,1")

ALL_SIGS = [S1, S2, S3, S4]
CURVED_SIGS = [S2, S3, S4]


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def sig_id(sig):
    return str(sig)
