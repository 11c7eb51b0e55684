import argparse


def _global_arguments(suppress=False):
    """
    Flags accepted before and after the subcommand; the subcommand copies
    suppress their defaults so they do not reset a value given earlier
    """
    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--config', type=str, default=default(None), metavar='PATH',
                        help='YAML config merged over the defaults')
    parser.add_argument('--opts', nargs='*', default=default([]), metavar='KEY VALUE',
                        help='config overrides, e.g. --opts FLOW.STEPS 500 SER.LR 1e-3')
    parser.add_argument('--seed', type=int, default=default(None), metavar='N',
                        help='global seed (default: SEED of the config)')
    parser.add_argument('--force', action='store_true', default=default(False),
                        help='accept artifacts recorded under another config')
    parser.add_argument('-v', '--verbose', action='store_true', default=default(False),
                        help='debug logging (per-step losses)')
    return parser


def build_parser():
    parser = argparse.ArgumentParser(prog='run.py', parents=[_global_arguments()],
                                     description='Factor ablation toolkit for speech emotion recognition')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True
    common = _global_arguments(suppress=True)

    p = sub.add_parser('prepare', parents=[common], help='map labels and assign speaker-disjoint splits')
    p.add_argument('--manifest', required=True, metavar='PATH', help='input manifest (JSON lines)')
    p.add_argument('--ratios', metavar='LIST', help='train,valid,test speaker ratios (default: DATA.SPLIT_RATIOS)')
    p.add_argument('--label-scheme', metavar='NAME', help='corpus label scheme (iemocap, savee, esdb, ...)')
    p.add_argument('--standardize', action='store_true', help='write 16 kHz mono 16-bit copies of the audio')
    p.add_argument('--out', required=True, metavar='DIR')

    p = sub.add_parser('synth-toy', parents=[common], help='generate a factor-coded synthetic corpus')
    p.add_argument('--factor', required=True, choices=['rhythm', 'pitch', 'content'])
    p.add_argument('--speakers', type=int, default=8, metavar='N')
    p.add_argument('--per-class', type=int, default=32, metavar='N', help='utterances per class')
    p.add_argument('--duration', type=float, metavar='SEC', help='utterance length (default: TOY.DURATION)')
    p.add_argument('--rate-scale', type=float, default=1.0, metavar='X', help='multiplies all syllable rates')
    p.add_argument('--corpus', default='toy', metavar='NAME')
    p.add_argument('--speaker-prefix', metavar='STR', help='speaker id prefix (default: <corpus>-spk)')
    p.add_argument('--out', required=True, metavar='DIR')

    p = sub.add_parser('featurize', parents=[common], help='extract mel and pitch features')
    p.add_argument('--manifest', required=True, metavar='PATH')
    p.add_argument('--cache', action='store_true', help='reuse features already in --out')
    p.add_argument('--out', metavar='DIR', help='feature store (default: PATHS.FEATURES_DIR)')

    p = sub.add_parser('train-timbre', parents=[common], help='train the d-vector speaker encoder')
    p.add_argument('--manifest', required=True, metavar='PATH')
    p.add_argument('--features', metavar='DIR', help='feature store (default: PATHS.FEATURES_DIR)')
    p.add_argument('--out', required=True, metavar='DIR')

    p = sub.add_parser('train-flow', parents=[common], help='train the factorized autoencoder')
    p.add_argument('--manifest', required=True, metavar='PATH')
    p.add_argument('--features', metavar='DIR', help='feature store (default: PATHS.FEATURES_DIR)')
    p.add_argument('--timbre', required=True, metavar='DIR', help='timbre encoder artifact')
    p.add_argument('--out', required=True, metavar='DIR')

    p = sub.add_parser('reconstruct', parents=[common], help='reconstruct a corpus under a factor mask')
    p.add_argument('--model', required=True, metavar='DIR', help='SpeechFlow artifact')
    p.add_argument('--timbre', required=True, metavar='DIR')
    p.add_argument('--manifest', required=True, metavar='PATH')
    p.add_argument('--features', metavar='DIR', help='feature store (default: PATHS.FEATURES_DIR)')
    p.add_argument('--mask', required=True, metavar='TAG', help='kept factors, e.g. CRP, C--, -R-')
    p.add_argument('--out', required=True, metavar='DIR')

    p = sub.add_parser('panels', parents=[common], help='render single-factor removal panels of one utterance')
    p.add_argument('--model', required=True, metavar='DIR')
    p.add_argument('--timbre', required=True, metavar='DIR')
    p.add_argument('--features', metavar='DIR', help='feature store (default: PATHS.FEATURES_DIR)')
    p.add_argument('--utterance', required=True, metavar='ID')
    p.add_argument('--out', required=True, metavar='DIR')

    p = sub.add_parser('train-ser', parents=[common], help='train the ACRNN emotion classifier')
    p.add_argument('--dataset', required=True, metavar='DIR', help='reconstructed dataset or feature store')
    p.add_argument('--manifest', required=True, metavar='PATH', help='manifest with splits and labels')
    p.add_argument('--mask-tag', required=True, metavar='TAG', help='mask of the dataset, or "raw"')
    p.add_argument('--out', required=True, metavar='DIR')

    p = sub.add_parser('ablate', parents=[common], help='run the nine-system ablation')
    p.add_argument('--flow', required=True, metavar='DIR')
    p.add_argument('--timbre', required=True, metavar='DIR')
    p.add_argument('--manifest', required=True, metavar='PATH')
    p.add_argument('--features', metavar='DIR', help='feature store (default: PATHS.FEATURES_DIR)')
    p.add_argument('--seeds', required=True, metavar='FILE', help='file with one or more integer seeds')
    p.add_argument('--repeats', type=int, metavar='N', help='classifier runs per seed (EVAL.REPEATS)')
    p.add_argument('--extra-test', action='append', default=[], metavar='MANIFEST:FEATURES',
                   help='test-only corpus scored with every system (repeatable)')
    p.add_argument('--out', required=True, metavar='DIR')

    p = sub.add_parser('xeval', parents=[common], help='cross-corpus evaluation of a trained classifier')
    p.add_argument('--ser', required=True, metavar='DIR')
    p.add_argument('--flow', metavar='DIR', help='training-side SpeechFlow (not needed for raw classifiers)')
    p.add_argument('--timbre', metavar='DIR')
    p.add_argument('--test-manifest', required=True, metavar='PATH')
    p.add_argument('--features', metavar='DIR', help='feature store (default: PATHS.FEATURES_DIR)')
    p.add_argument('--out', required=True, metavar='DIR')

    p = sub.add_parser('report', parents=[common], help='re-emit tables and figures from results.json')
    p.add_argument('--results', required=True, metavar='FILE')
    p.add_argument('--out', required=True, metavar='DIR')

    return parser
