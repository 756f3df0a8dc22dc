import numpy as np
import pytest

from vlr import SceneGraph, Vocabulary


@pytest.fixture
def vocab():
    return Vocabulary(
        object_classes=["cat", "dog", "car"],
        attribute_categories=[("color", ["red", "blue"]),
                              ("size", ["small", "large"])],
        relation_classes=["near", "behind"],
        object_category_members={"animal": ["cat", "dog"], "vehicle": ["car"]},
        name_aliases={"cats": "cat", "kitty": "cat", "autos": "car"},
    )


@pytest.fixture
def sg(vocab):
    boxes = np.array([[0, 0, 10, 10], [20, 0, 30, 10], [40, 0, 50, 10]], float)
    objects = np.array([[0.9, 0.0, 0.0],
                        [0.0, 0.8, 0.0],
                        [0.0, 0.0, 0.7]])
    attrs = np.zeros((3, 2, 2))
    attrs[0, 0, 0] = 0.9   # cat: red
    attrs[1, 0, 1] = 0.8   # dog: blue
    attrs[2, 0, 0] = 0.6   # car: red
    attrs[0, 1, 0] = 0.7   # cat: small
    attrs[1, 1, 1] = 0.9   # dog: large
    attrs[2, 1, 1] = 0.8   # car: large
    rels = np.zeros((3, 3, 2))
    rels[0, 1, 0] = 0.6    # cat near dog
    rels[1, 2, 1] = 0.5    # dog behind car
    graph = SceneGraph("img0", boxes, objects, attrs, rels, vocab)
    graph.validate()
    return graph
