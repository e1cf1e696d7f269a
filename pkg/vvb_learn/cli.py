"""
``vvb`` command line.

Subcommands: generate, train, eval, reconstruct, render and pca-report. Each
writes its outputs, its resolved ``run.cfg`` and a manifest entry into an
output directory.
"""

# Standard Library
import argparse
import logging
import math
import os
import sys

# Scientific
import numpy as np

# This module
from . import __version__, fileformat
from .cnn import CNNModel, cnn_train, init_model
from .config import RunConfig, parse_int_list
from .dataset import (
    CLASS15,
    REGRESSION,
    SECTOR26,
    generate_class15,
    generate_regression,
    generate_sector26,
    mix,
    split_halves,
    subsample_per_class,
)
from .errors import (
    ConfigError,
    DomainError,
    FormatError,
    PathError,
    ShapeMismatchError,
    TrainingDivergedError,
    VVBError,
)
from .experiments import curve_csv, evaluate, ncomp_curve
from .noise import perturb_field, perturb_stokes
from .optics import VVBState, ppm_bytes, stokes, to_rgb
from .pca import PCAModel, pca_fit, radii_stats
from .reconstruction import (
    alignment_from_file,
    alignment_to_file,
    calibrate,
    reconstruct,
)
from .registry import Manifest
from .svm import SVMModel, svm_train


logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

# Most specific first.
EXIT_CODES = (
    (ConfigError, 2),
    (ShapeMismatchError, 4),
    (FormatError, 3),
    (PathError, 3),
    (TrainingDivergedError, 1),
    (DomainError, 1),
    (VVBError, 1),
)

GENERATORS = {
    CLASS15: generate_class15,
    SECTOR26: generate_sector26,
    REGRESSION: generate_regression,
}

TRAIN_FILE = 'train.vvbd'
VAL_FILE = 'val.vvbd'

# argparse dest -> (section, key) of the run config
FLAG_KEYS = {
    'task': ('run', 'task'),
    'seed': ('run', 'seed'),
    'jobs': ('run', 'jobs'),
    'resolution': ('grid', 'resolution'),
    'half_extent': ('grid', 'half_extent'),
    'waist': ('grid', 'waist'),
    'noise': ('noise', 'preset'),
    'impurity': ('noise', 'impurity_eps'),
    'per_class': ('dataset', 'per_class'),
    'val_per_class': ('dataset', 'val_per_class'),
    'count': ('dataset', 'count'),
    'val_count': ('dataset', 'val_count'),
    'per_class_limit': ('dataset', 'per_class_limit'),
    'mix_fraction': ('dataset', 'mix_fraction'),
    'ncomp': ('pca', 'n_components'),
    'bins': ('pca', 'bins'),
    'lam': ('svm', 'lam'),
    'svm_epochs': ('svm', 'epochs'),
    'epochs': ('cnn', 'epochs'),
    'batch_size': ('cnn', 'batch_size'),
    'learning_rate': ('cnn', 'learning_rate'),
    'momentum': ('cnn', 'momentum'),
    'model_kind': ('train', 'model'),
    'ncomp_sweep': ('train', 'ncomp_sweep'),
    'train': ('paths', 'train'),
    'val': ('paths', 'val'),
    'mix_dataset': ('paths', 'mix_dataset'),
    'dataset': ('paths', 'dataset'),
    'model': ('paths', 'model'),
    'pca': ('paths', 'pca'),
    'alignment': ('paths', 'alignment'),
    'calibration': ('paths', 'calibration'),
    'm1': ('state', 'm1'),
    'm2': ('state', 'm2'),
    'theta': ('state', 'theta'),
    'phi': ('state', 'phi'),
}


def _resolve_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {
        key: getattr(args, dest, None) for dest, key in FLAG_KEYS.items()
    }
    config.update(overrides)
    if getattr(args, 'deterministic', False):
        config.set('run', 'deterministic', True)
    return config.absolute_paths().validate()


def _output_dir(path) -> str:
    path = os.fspath(path)
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as error:
        raise PathError('Cannot create {}: {}'.format(path, error))
    if not os.access(path, os.W_OK):
        raise PathError('Output directory {} is not writable'.format(path))
    return path


def _write_text(path, text: str):
    fileformat.atomic_write(path, text.encode('utf-8'))


def cmd_generate(args) -> int:
    config = _resolve_config(args)
    out = _output_dir(args.out)
    task = config.get('run', 'task')
    noise = config.noise()

    if task == REGRESSION:
        counts = (
            config.get('dataset', 'count'),
            config.get('dataset', 'val_count'),
        )
    else:
        counts = (
            config.get('dataset', 'per_class'),
            config.get('dataset', 'val_per_class'),
        )

    train, val = GENERATORS[task](
        *counts,
        cfg=noise,
        grid=config.grid(),
        seed=config.seed,
        jobs=config.jobs,
    )

    with Manifest.open(out) as manifest:
        for name, dataset in ((TRAIN_FILE, train), (VAL_FILE, val)):
            dataset.provenance['noise_preset'] = config.get('noise', 'preset')
            path = os.path.join(out, name)
            fileformat.save(dataset, path)
            manifest.record_dataset(path, dataset)
            logger.info('Wrote %d images to %s', len(dataset), path)

    config.write(out)
    return 0


def _load_training_data(config: RunConfig):
    train = fileformat.load(config.require('paths', 'train'))
    limit = config.get('dataset', 'per_class_limit')
    if limit is not None:
        train = subsample_per_class(train, limit, seed=config.seed)

    mix_path = config.get('paths', 'mix_dataset')
    if mix_path:
        fraction = config.get('dataset', 'mix_fraction')
        if fraction is None:
            raise ConfigError('--mix-dataset requires --mix-fraction')
        train = mix(train, fileformat.load(mix_path), fraction, config.seed)

    val_path = config.get('paths', 'val')
    val = fileformat.load(val_path) if val_path else None
    if val is not None and val.resolution != train.resolution:
        raise ShapeMismatchError(
            'Train resolution {} differs from validation {}'.format(
                train.resolution, val.resolution
            )
        )
    return train, val


def _train_svm(config, out, train, val, manifest):
    val_path = config.get('paths', 'val')
    if val is None:
        train, val = split_halves(train)
        val_path = None
        logger.info('No validation set; using a class-stratified half split')

    sweep = config.get('train', 'ncomp_sweep')
    if sweep:
        curve = ncomp_curve(
            train,
            val,
            sweep,
            lam=config.get('svm', 'lam'),
            epochs=config.get('svm', 'epochs'),
            seed=config.seed,
        )
        _write_text(
            os.path.join(out, 'ncomp_curve.csv'), curve_csv(curve, 'n_c')
        )

    n_c = config.get('pca', 'n_components')
    pca = pca_fit(train, n_c)
    model = svm_train(
        pca.transform(train),
        train.labels,
        lam=config.get('svm', 'lam'),
        epochs=config.get('svm', 'epochs'),
        seed=config.seed,
        n_classes=train.n_classes,
        projection=config.get('svm', 'projection'),
        task=train.label_spec.task,
    )
    accuracy = evaluate(model, val, pca).average_accuracy

    pca_path = os.path.join(out, 'pca.vvbm')
    svm_path = os.path.join(out, 'svm.vvbm')
    fileformat.save_model(pca.to_file(), pca_path)
    svm_file = model.to_file()
    svm_file.metadata['pca_file'] = 'pca.vvbm'
    fileformat.save_model(svm_file, svm_path)

    rows = ['epoch,objective']
    rows.extend(
        '{},{!r}'.format(epoch, value)
        for epoch, value in enumerate(model.history, start=1)
    )
    _write_text(os.path.join(out, 'metrics.csv'), '\n'.join(rows) + '\n')

    train_path = config.get('paths', 'train')
    manifest.record_model(pca_path, 'pca', train.label_spec.task, train_path)
    manifest.record_model(
        svm_path,
        'svm',
        train.label_spec.task,
        train_path,
        val_path,
        n_components=n_c,
        val_accuracy=accuracy,
    )
    return accuracy


def _train_cnn(config, out, train, val, manifest):
    model = init_model(
        train.resolution,
        train.n_classes,
        seed=config.seed,
        task=train.label_spec.task,
    )
    metrics_path = os.path.join(out, 'metrics.csv')
    rows = ['epoch,train_loss,train_acc,val_acc']

    def on_epoch(metrics):
        rows.append(
            '{},{!r},{!r},{!r}'.format(
                metrics.epoch,
                metrics.train_loss,
                metrics.train_acc,
                metrics.val_acc,
            )
        )
        _write_text(metrics_path, '\n'.join(rows) + '\n')

    model, _ = cnn_train(
        model,
        train,
        val,
        epochs=config.get('cnn', 'epochs'),
        batch_size=config.get('cnn', 'batch_size'),
        learning_rate=config.get('cnn', 'learning_rate'),
        momentum=config.get('cnn', 'momentum'),
        seed=config.seed,
        jobs=config.jobs,
        on_epoch=on_epoch,
    )

    path = os.path.join(out, 'cnn.vvbm')
    fileformat.save_model(model.to_file(), path)
    accuracy = None
    if val is not None:
        accuracy = evaluate(model, val).average_accuracy
    manifest.record_model(
        path,
        'cnn',
        train.label_spec.task,
        config.get('paths', 'train'),
        config.get('paths', 'val'),
        val_accuracy=accuracy,
    )
    return accuracy


def cmd_train(args) -> int:
    config = _resolve_config(args)
    out = _output_dir(args.out)
    kind = config.require('train', 'model')
    train, val = _load_training_data(config)

    with Manifest.open(out) as manifest:
        if kind == 'svm':
            accuracy = _train_svm(config, out, train, val, manifest)
        else:
            accuracy = _train_cnn(config, out, train, val, manifest)

    if accuracy is not None:
        print('average accuracy {:.4f}'.format(accuracy))
    config.write(out)
    return 0


def _load_classifier(path, pca_path=None):
    model_file = fileformat.load_model(path)
    if model_file.kind == 'cnn':
        return CNNModel.from_file(model_file), None
    if model_file.kind != 'svm':
        raise FormatError(
            '{} holds a {} model, not a classifier'.format(
                path, model_file.kind
            )
        )

    model = SVMModel.from_file(model_file)
    if pca_path is None:
        name = model_file.metadata.get('pca_file')
        if name is None:
            raise ConfigError('SVM evaluation needs --pca')
        pca_path = os.path.join(os.path.dirname(os.fspath(path)), name)
    pca = PCAModel.from_file(fileformat.load_model(pca_path, 'pca'))
    return model, pca


def cmd_eval(args) -> int:
    config = _resolve_config(args)
    out = _output_dir(args.out)
    model_path = config.require('paths', 'model')
    dataset_path = config.require('paths', 'dataset')
    model, pca = _load_classifier(model_path, config.get('paths', 'pca'))
    dataset = fileformat.load(dataset_path)

    matrix = evaluate(model, dataset, pca)
    names = [
        dataset.label_spec.class_name(i) for i in range(matrix.n_classes)
    ]
    text = matrix.to_text(names)
    _write_text(os.path.join(out, 'confusion.txt'), text)
    _write_text(os.path.join(out, 'confusion.csv'), matrix.to_csv())
    sys.stdout.write(text)

    # The training run's manifest lives beside the model.
    with Manifest.open(os.path.dirname(model_path)) as manifest:
        manifest.check_drift(model_path, dataset_path, matrix.average_accuracy)
        manifest.record_evaluation(
            model_path, dataset_path, len(dataset), matrix.average_accuracy
        )

    config.write(out)
    return 0


def _histogram_csv(counts, edges) -> str:
    lines = ['bin_low,bin_high,count']
    lines.extend(
        '{!r},{!r},{}'.format(float(lo), float(hi), int(count))
        for lo, hi, count in zip(edges[:-1], edges[1:], counts)
    )
    return '\n'.join(lines) + '\n'


def cmd_reconstruct(args) -> int:
    config = _resolve_config(args)
    out = _output_dir(args.out)
    dataset_path = config.require('paths', 'dataset')
    dataset = fileformat.load(dataset_path)
    if dataset.angles is None:
        raise DomainError(
            'Reconstruction needs true (theta, phi) labels; {} is a {} '
            'dataset'.format(dataset_path, dataset.label_spec.task)
        )

    pca_path = config.require('paths', 'pca')
    pca = PCAModel.from_file(fileformat.load_model(pca_path, 'pca'))
    alignment_path = config.get('paths', 'alignment')
    if alignment_path:
        alignment = alignment_from_file(
            fileformat.load_model(alignment_path, 'alignment')
        )
    else:
        calibration_path = config.get('paths', 'calibration')
        calibration = fileformat.load(calibration_path or dataset_path)
        alignment = calibrate(pca, calibration)

    result = reconstruct(pca, alignment, dataset)
    bins = config.get('pca', 'bins')
    _write_text(os.path.join(out, 'reconstruction.csv'), result.to_csv())
    counts, edges = np.histogram(result.fidelity, bins=bins, range=(0, 1))
    _write_text(
        os.path.join(out, 'fidelity_hist.csv'), _histogram_csv(counts, edges)
    )
    summary = 'mean_fidelity {!r}\nstd_fidelity {!r}\n'.format(
        result.mean_fidelity, float(np.std(result.fidelity))
    )
    _write_text(os.path.join(out, 'summary.txt'), summary)
    sys.stdout.write(summary)

    config.write(out)
    return 0


def cmd_render(args) -> int:
    config = _resolve_config(args)
    target = os.path.abspath(args.out)
    out = _output_dir(os.path.dirname(target))

    for key, default in (('theta', math.pi / 2), ('phi', 0.0)):
        if config.get('state', key) is None:
            config.set('state', key, default)
    state = VVBState(
        config.require('state', 'm1'),
        config.require('state', 'm2'),
        config.get('state', 'theta'),
        config.get('state', 'phi'),
    )
    grid = config.grid()
    noise = config.noise()
    field = perturb_field(state, grid, noise, 0)
    img = perturb_stokes(stokes(field), noise, 0)
    fileformat.atomic_write(target, ppm_bytes(to_rgb(img)))
    logger.info('Rendered %s to %s', state, target)

    config.write(out)
    return 0


def cmd_pca_report(args) -> int:
    config = _resolve_config(args)
    out = _output_dir(args.out)
    dataset = fileformat.load(config.require('paths', 'dataset'))
    n_c = min(
        config.get('pca', 'n_components'),
        len(dataset),
        3 * dataset.resolution ** 2,
    )
    pca = pca_fit(dataset, n_c)

    share = pca.explained_share
    cumulative = np.cumsum(share)
    rows = ['component,variance,share,cumulative_share']
    rows.extend(
        '{},{!r},{!r},{!r}'.format(i + 1, float(v), float(s), float(c))
        for i, (v, s, c) in enumerate(
            zip(pca.explained_variance, share, cumulative)
        )
    )
    _write_text(
        os.path.join(out, 'explained_variance.csv'), '\n'.join(rows) + '\n'
    )
    fileformat.save_model(pca.to_file(), os.path.join(out, 'pca.vvbm'))

    summary = ['top3_share {!r}'.format(float(share[:3].sum()))]
    if pca.n_components >= 3:
        stats = radii_stats(
            pca.transform(dataset)[:, :3], bins=config.get('pca', 'bins')
        )
        _write_text(
            os.path.join(out, 'radii.csv'),
            _histogram_csv(stats.counts, stats.edges),
        )
        summary.append('radius_mean {!r}'.format(stats.mean))
        summary.append('radius_std {!r}'.format(stats.std))

        if dataset.angles is not None:
            fileformat.save_model(
                alignment_to_file(calibrate(pca, dataset)),
                os.path.join(out, 'alignment.vvbm'),
            )

    text = '\n'.join(summary) + '\n'
    _write_text(os.path.join(out, 'summary.txt'), text)
    sys.stdout.write(text)

    config.write(out)
    return 0


def _int_list(text: str):
    try:
        return parse_int_list(text)
    except ValueError:
        raise argparse.ArgumentTypeError('expected integers like 5,10,25')


def _common(parser, out_default, out_help='Output directory.'):
    parser.add_argument('--config', help='Run config to start from.')
    parser.add_argument('--seed', type=int, help='Seed for every random draw.')
    parser.add_argument('--jobs', type=int, help='Parallel workers.')
    parser.add_argument(
        '--deterministic',
        action='store_true',
        help='Run sequentially for bit-reproducible results.',
    )
    parser.add_argument('--out', default=out_default, help=out_help)


def _grid_flags(parser):
    parser.add_argument('--resolution', type=int, help='Pixels per side.')
    parser.add_argument('--half-extent', type=float, help='Grid half width.')
    parser.add_argument('--waist', type=float, help='Beam waist.')
    parser.add_argument('--noise', help='Noise preset: none or labproxy.')
    parser.add_argument('--impurity', type=float, help='Radial impurity.')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='vvb',
        description='Simulate vector vortex beams and learn to classify them.',
    )
    parser.add_argument(
        '--version', action='version', version='%(prog)s ' + __version__
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true')
    verbosity.add_argument('--quiet', action='store_true')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    generate = commands.add_parser('generate', help='Generate datasets.')
    _common(generate, 'data')
    _grid_flags(generate)
    generate.add_argument('--task', choices=RunConfig.TASKS)
    generate.add_argument('--per-class', type=int)
    generate.add_argument('--val-per-class', type=int)
    generate.add_argument('--count', type=int, help='Regression train size.')
    generate.add_argument('--val-count', type=int)
    generate.set_defaults(handler=cmd_generate)

    train = commands.add_parser('train', help='Train an SVM or a CNN.')
    _common(train, 'model')
    train.add_argument('--model', dest='model_kind', choices=RunConfig.MODELS)
    train.add_argument('--train', help='Training dataset.')
    train.add_argument('--val', help='Validation dataset.')
    train.add_argument('--ncomp', type=int, help='PCA dimensions n_c.')
    train.add_argument('--ncomp-sweep', type=_int_list)
    train.add_argument('--lam', type=float, help='SVM regularization.')
    train.add_argument('--svm-epochs', type=int)
    train.add_argument('--epochs', type=int, help='CNN epochs.')
    train.add_argument('--batch-size', type=int)
    train.add_argument('--learning-rate', type=float)
    train.add_argument('--momentum', type=float)
    train.add_argument('--per-class-limit', type=int)
    train.add_argument('--mix-dataset', help='Noisy images to mix in.')
    train.add_argument('--mix-fraction', type=float)
    train.set_defaults(handler=cmd_train)

    evaluate_ = commands.add_parser('eval', help='Confusion matrix.')
    _common(evaluate_, 'evaluation')
    evaluate_.add_argument('--model', help='SVM or CNN model file.')
    evaluate_.add_argument('--dataset', help='Dataset to evaluate on.')
    evaluate_.add_argument('--pca', help='PCA model for SVM features.')
    evaluate_.set_defaults(handler=cmd_eval)

    reconstruct_ = commands.add_parser(
        'reconstruct', help='Bloch vectors from PCA coordinates.'
    )
    _common(reconstruct_, 'reconstruction')
    reconstruct_.add_argument('--pca', help='PCA model file.')
    reconstruct_.add_argument('--dataset', help='Dataset with true angles.')
    reconstruct_.add_argument('--alignment')
    reconstruct_.add_argument(
        '--calibration', help='Dataset to fit the alignment on.'
    )
    reconstruct_.add_argument('--bins', type=int)
    reconstruct_.set_defaults(handler=cmd_reconstruct)

    render = commands.add_parser('render', help='Write a PPM image.')
    _common(render, 'vvb.ppm', 'Output PPM file.')
    _grid_flags(render)
    render.add_argument('--m1', type=int)
    render.add_argument('--m2', type=int)
    render.add_argument('--theta', type=float, help='Default pi / 2.')
    render.add_argument('--phi', type=float, help='Default 0.')
    render.set_defaults(handler=cmd_render)

    report = commands.add_parser(
        'pca-report', help='Explained variance and radii statistics.'
    )
    _common(report, 'pca-report')
    report.add_argument('--dataset', help='Dataset to decompose.')
    report.add_argument('--ncomp', type=int)
    report.add_argument('--bins', type=int)
    report.set_defaults(handler=cmd_pca_report)

    return parser


def _configure_logging(verbose: bool, quiet: bool):
    level = logging.INFO
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT)


def exit_code(error: VVBError) -> int:
    for error_type, code in EXIT_CODES:
        if isinstance(error, error_type):
            return code
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    try:
        return args.handler(args)
    except VVBError as error:
        logger.error('%s', error)
        return exit_code(error)


if __name__ == '__main__':
    sys.exit(main())
