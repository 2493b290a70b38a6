import os
import sys

sys.path.insert(0, os.path.abspath('..'))

from hhjax.version import __version__

project = 'hhjax'
author = 'hhjax developers'
release = __version__

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.napoleon', 'sphinx.ext.mathjax']

exclude_patterns = ['_build']

html_theme = 'sphinx_rtd_theme'

autodoc_typehints = 'description'
autodoc_type_aliases = {'ArrayLike': 'Union[float, Sequence[float], ndarray]'}
