import numpy as np
import pytest

from riq.datagen import GenParams, generate_dataset
from riq.pv_index import build_index
from riq.rdf_core import group_by_context

from helpers import XSD_INTEGER, lit, quad, riq_config


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo and end-to-end runs over generated datasets")


@pytest.fixture
def movie_quads():
    """Two producers in separate graphs, only the first with a home page, plus a city graph."""
    return [
        quad("producer/1", "producer_name", lit("Mani Ratnam"), "graph/a"),
        quad("producer/1", "label", lit("Mani Ratnam (Producer)"), "graph/a"),
        quad("producer/1", "page", "page/1", "graph/a"),
        quad("film/1", "producer", "producer/1", "graph/a"),
        quad("producer/2", "producer_name", lit("Satyajit Ray"), "graph/b"),
        quad("producer/2", "label", lit("Satyajit Ray (Producer)"), "graph/b"),
        quad("film/2", "producer", "producer/2", "graph/b"),
        quad("film/3", "producer", "producer/2", "graph/b"),
        quad("city/1", "population", lit("9000000", datatype=XSD_INTEGER), "graph/c"),
        quad("city/2", "population", lit("120000", datatype=XSD_INTEGER), "graph/c"),
        quad("city/1", "name", lit("Chennai", language="en"), "graph/c"),
    ]


@pytest.fixture
def movie_store(movie_quads):
    return group_by_context(movie_quads)


@pytest.fixture
def movie_index(movie_quads, tmp_path):
    return build_index(movie_quads, riq_config(), tmp_path / "movie-index")


@pytest.fixture(scope="session")
def small_dataset():
    params = GenParams(vocabularies=3, graphs=30, triples=20, predicates=5, entities=12, literals=4, overlap=0.2, seed=7)
    return generate_dataset(params)


@pytest.fixture(scope="session")
def small_store(small_dataset):
    return group_by_context(small_dataset[0])


@pytest.fixture(scope="session")
def small_index(small_dataset, tmp_path_factory):
    return build_index(small_dataset[0], riq_config(), tmp_path_factory.mktemp("small") / "index")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
