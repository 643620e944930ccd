__all__ = ('parser',)
import argparse

from . import loja, scalar_demo, simulate, spectrum, verify

parser = argparse.ArgumentParser(prog='shrinkerlab',
                                 description='Численная лаборатория перемасштабированного потока средней кривизны')
parser.add_argument('--debug', action='store_true', help='уровень DEBUG и трассировка icecream')
subparsers = parser.add_subparsers(dest='command', required=True)
for module in (simulate, spectrum, loja, verify, scalar_demo):
    module.register(subparsers)
