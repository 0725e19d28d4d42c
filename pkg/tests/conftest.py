"""Shared fixtures: built-in models and their Hodge data are built once per session."""

import functools

import pytest

from pairdef.hodge import build_hodge
from pairdef.models import BUILTINS, builtin


@functools.lru_cache(maxsize=None)
def cached_model(name):
    return builtin(name)


@functools.lru_cache(maxsize=None)
def cached_hodge(name):
    return build_hodge(cached_model(name))


@pytest.fixture(params=sorted(BUILTINS))
def builtin_name(request):
    return request.param


@pytest.fixture
def model(builtin_name):
    return cached_model(builtin_name)


@pytest.fixture
def hodge(builtin_name):
    return cached_hodge(builtin_name)
