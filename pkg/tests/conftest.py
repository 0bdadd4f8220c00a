import pytest

from votingfarm.algorithms import encode_scalar
from votingfarm.core import VoteObject


@pytest.fixture
def scalar_ballot():
    """Build a ballot of encoded scalars; members are numbered from 1.

    Pass invalid={slot indices} to mark items invalid (their payload is
    still encoded, mirroring a corrupted-but-present message).
    """

    def build(values, invalid=()):
        return [
            VoteObject(encode_scalar(v), i not in set(invalid), i + 1)
            for i, v in enumerate(values)
        ]

    return build
