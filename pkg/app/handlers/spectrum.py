import sys

import pandas as pd

from app.config import OUTPUT_ROOT
from grids import CylinderGrid
from report import FLOAT_FORMAT, write_frame
from spectral import SpectralBasis, discrete_spectrum, kernel_dimension, numeric_kernel_dimension

TOLERANCE = {'fd': 1e-3, 'spectral': 1e-12}


def register(subparsers) -> None:
    parser = subparsers.add_parser('spectrum', help='спектр L / spectrum of L')
    parser.add_argument('--k', type=int, default=1)
    parser.add_argument('--n', type=int, default=2)
    parser.add_argument('--modes', type=int, default=20)
    parser.add_argument('--method', choices=('fd', 'spectral'), default='fd')
    parser.add_argument('--n-theta', type=int, default=64)
    parser.add_argument('--n-y', type=int, default=481)
    parser.add_argument('--L', type=float, default=12.0)
    parser.add_argument('--M', type=int, default=64)
    parser.set_defaults(handler=handle)


def _exact_table(k: int, n: int, count: int) -> pd.DataFrame:
    basis = SpectralBasis(k, n, j_max=6, m_max=8)
    rows = [{'j': mode.j, 'label': mode.label, 'm': ' '.join(map(str, mode.m)), 'exact': mode.eigenvalue}
            for mode in basis.modes]
    table = pd.DataFrame(rows)
    table['order'] = table['exact'].abs()
    table = table.sort_values(['order', 'j', 'label', 'm'], kind='mergesort').head(count)
    return table.drop(columns='order').reset_index(drop=True)


def handle(args) -> int:
    if (args.k, args.n) != (1, 2):
        # дискретный L строится только для k = 1, n = 2
        table = _exact_table(args.k, args.n, args.modes)
        table.to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        print(f'kernel_dimension: {kernel_dimension(args.k, args.n)}')
        write_frame(table, OUTPUT_ROOT / f'spectrum_k{args.k}_n{args.n}.csv')
        return 0
    grid = CylinderGrid(args.n_theta, args.n_y, args.L, args.M)
    table = discrete_spectrum(grid, args.method, args.modes)
    table.to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    dimension = numeric_kernel_dimension(grid)
    print(f'kernel_dimension: {dimension}')
    write_frame(table, OUTPUT_ROOT / f'spectrum_{args.method}.csv')
    return 0 if table['error'].max() < TOLERANCE[args.method] and dimension == 3 else 1
