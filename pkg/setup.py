#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
    Setup file for edgespectra.
    Use setup.cfg to configure your project.
"""
import sys

from setuptools import setup

if sys.version_info < (3, 8):
    print("Error: edgespectra needs Python 3.8 or newer!")
    sys.exit(1)


if __name__ == "__main__":
    setup()
