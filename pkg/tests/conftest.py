#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
    Shared small instances for the edgespectra tests.
"""

import pytest

from edgespectra.assembly import Basis
from edgespectra.model import ModelParams


@pytest.fixture
def params():
    return ModelParams(B=2., L=8., V0=0.3, flux=0.25)


@pytest.fixture
def clean_params():
    return ModelParams(B=2., L=8., V0=0., flux=0.25)


@pytest.fixture
def basis(params):
    return Basis.for_params(params, n_x=129)


@pytest.fixture
def small_basis(params):
    return Basis.for_params(params, n_x=129, J=8)
