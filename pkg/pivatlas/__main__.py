""" Entry point: python -m pivatlas COMMAND ... """

from sys import exit

from .cli import main

if __name__.endswith("__main__"):
    exit(main())
