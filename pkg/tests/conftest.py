from __future__ import annotations

import pytest

from dyntopk.streams import EventRec, ItemRec, QueryRec

TERMS = (("news", 1.0),)


@pytest.fixture
def evict_restore_stream():
    """One top-2 query and four items with equal text scores.

    Static scores a=0.9, b=0.5, c=0.1, d=0.6 (total 0.57, 0.45, 0.33, 0.48).
    c arrives below both results and changes nothing; d pushes b out; a
    retweet of b brings it back, evicting d.
    """
    return [
        QueryRec("q", 0.0, TERMS, 2),
        ItemRec("a", 1.0, TERMS, 0.9),
        ItemRec("b", 2.0, TERMS, 0.5),
        EventRec("e1", 2.5, "a", 1.0),
        ItemRec("c", 3.0, TERMS, 0.1),
        EventRec("e2", 3.5, "a", 0.5),
        ItemRec("d", 4.0, TERMS, 0.6),
        EventRec("e3", 5.0, "b", 1.0),
        EventRec("e4", 6.0, "c", 0.1),
    ]
