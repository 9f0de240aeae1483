"""Module entry point: ``python -m cxfilter``."""

from cxfilter.cli import entry

if __name__ == "__main__":
    entry()
