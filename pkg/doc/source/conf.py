# Configuration file for the Sphinx documentation builder.
#
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Project information -----------------------------------------------------

project = 'irsofdm'
copyright = '2021, Matthew Reid'
author = 'Matthew Reid'

# The full version, including alpha/beta/rc tags
release = '0.0.1'


# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'sphinx.ext.viewcode',
    'sphinx.ext.intersphinx',
    'sphinx.ext.todo',
    'sphinx.ext.mathjax',
]

autodoc_member_order = 'bysource'
autodoc_default_options = {
    'show-inheritance':True,
}

templates_path = ['_templates']
exclude_patterns = []


# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_theme_options = {
    'navigation_depth': 8,
}

intersphinx_mapping = {
    'python':('https://docs.python.org/', None),
    'numpy':('https://numpy.org/doc/stable/', None),
    'scipy':('https://docs.scipy.org/doc/scipy/', None),
    'pydispatch': ('https://python-dispatch.readthedocs.io/en/latest/', None),
}


# -- Dispatcher events -------------------------------------------------------
# ``.. event::`` documents the events of :class:`pydispatch.Dispatcher`
# subclasses like a method signature and ``:event:`` links to them.

def setup(app):
    from sphinx.domains.python import PyFunction, PyXRefRole

    class EventDirective(PyFunction):
        pass

    app.add_directive_to_domain('py', 'event', EventDirective)
    app.add_role_to_domain('py', 'event', PyXRefRole())
    return {
        'version': '0.1',
        'parallel_read_safe': True,
        'parallel_write_safe': True,
    }
