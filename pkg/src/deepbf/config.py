'''
Run configuration.

A JSON document is validated into frozen dataclasses before any
computation: unknown keys and mistyped values raise ``ConfigError``. The
SHA-256 of the normalised document is the config hash written into every
output file.

The JSON schema is derived from the dataclass annotations plus the
``LIMITS`` table, and ``parse_config`` validates against that same schema,
so ``docs/config.schema.json`` is a rendering of ``config_schema()``.
'''

import operator
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, Tuple, Union, get_args, get_origin, get_type_hints
from .errors import ConfigError, DeepBFError
from .estimator import TrainConfig
from .models import BUILDERS, ModelPair, make_builtin_pair
from .nn.network import ARCHS
from .rankabc import DISTANCES, AbcConfig
from .utility import config_hash, read_json

SCHEMA_DIALECT = 'https://json-schema.org/draft/2020-12/schema'

@dataclass(frozen = True)
class PairSection(object):
    name : str = 'data1'
    hyperparams : Dict[str, Any] = field(default_factory = dict)
    priors : Tuple[float, float] = (0.5, 0.5)

    def build(self) -> ModelPair:
        return make_builtin_pair(self.name, self.hyperparams, self.priors)

@dataclass(frozen = True)
class EstimateSection(object):
    eps : float = 0.

@dataclass(frozen = True)
class EvalSection(object):
    T0 : int = 1500
    method : str = 'deepbf'

@dataclass(frozen = True)
class CriticizeSection(object):
    replicates : int = 1000
    model : int = 2
    level : float = 0.95

@dataclass(frozen = True)
class RunConfig(object):
    pair : PairSection = field(default_factory = PairSection)
    n : int = 2
    seed : int = 0
    direction : int = 1
    output : str = '.'
    train : TrainConfig = field(default_factory = TrainConfig)
    abc : AbcConfig = field(default_factory = AbcConfig)
    estimate : EstimateSection = field(default_factory = EstimateSection)
    eval : EvalSection = field(default_factory = EvalSection)
    criticize : CriticizeSection = field(default_factory = CriticizeSection)

    def to_dict(self) -> Dict[str, Any]:
        abc = {f.name : getattr(self.abc, f.name) for f in fields(AbcConfig)}
        train = self.train.to_dict()
        train.pop('seed')
        return {
            'pair' : {'name' : self.pair.name, 'hyperparams' : dict(self.pair.hyperparams), 'priors' : list(self.pair.priors)},
            'n' : self.n, 'seed' : self.seed, 'direction' : self.direction, 'output' : self.output,
            'train' : train, 'abc' : abc,
            'estimate' : vars_of(self.estimate), 'eval' : vars_of(self.eval), 'criticize' : vars_of(self.criticize),
        }

    def output_path(self, path) -> Path:
        '''``path`` under the output directory; absolute paths are kept as given.'''
        return Path(self.output) / path

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

def vars_of(section) -> Dict[str, Any]:
    return {f.name : getattr(section, f.name) for f in fields(section)}

# Value constraints by dotted key; types and defaults come from the dataclasses.
LIMITS = {
    'n' : {'minimum' : 1},
    'seed' : {'minimum' : 0, 'maximum' : (1 << 64) - 1},
    'direction' : {'enum' : [1, 2]},
    'pair.name' : {'enum' : sorted(BUILDERS)},
    'pair.priors' : {'items' : {'exclusiveMinimum' : 0, 'exclusiveMaximum' : 1}, 'minItems' : 2, 'maxItems' : 2},
    'train.iterations' : {'minimum' : 1},
    'train.minibatch_per_model' : {'minimum' : 2},
    'train.eval_reference_batch' : {'minimum' : 2},
    'train.restarts' : {'minimum' : 1},
    'train.holdout' : {'minimum' : 0},
    'train.learning_rate' : {'exclusiveMinimum' : 0},
    'train.arch.kind' : {'enum' : list(ARCHS)},
    'train.arch.width' : {'minimum' : 1},
    'train.arch.depth' : {'minimum' : 0},
    'train.arch.first_width' : {'minimum' : 1},
    'train.arch.reduction_ratio' : {'exclusiveMinimum' : 0, 'maximum' : 1},
    'train.arch.floor' : {'minimum' : 1},
    'train.arch.q' : {'minimum' : 1},
    'train.arch.inner_widths' : {'items' : {'minimum' : 1}},
    'abc.total_samples' : {'minimum' : 1},
    'abc.strata' : {'minimum' : 1},
    'abc.per_stratum_keep' : {'minimum' : 1},
    'abc.final_keep' : {'minimum' : 2},
    'abc.summary' : {'const' : 'identity'},
    'abc.distance' : {'enum' : list(DISTANCES)},
    'estimate.eps' : {'minimum' : 0},
    'eval.T0' : {'minimum' : 2},
    'eval.method' : {'enum' : ['deepbf', 'abc']},
    'criticize.replicates' : {'minimum' : 100},
    'criticize.model' : {'enum' : [1, 2]},
    'criticize.level' : {'exclusiveMinimum' : 0, 'exclusiveMaximum' : 1},
}

# The training seed is the top-level seed.
HIDDEN = {'train.seed'}

JSON_TYPES = {bool : 'boolean', int : 'integer', float : 'number', str : 'string'}

def _json_value(value):
    if isinstance(value, (tuple, list)):
        return [_json_value(v) for v in value]
    if isinstance(value, dict):
        return {k : _json_value(v) for k, v in value.items()}
    return value

def _type_schema(annotation) -> Dict[str, Any]:
    origin, args = get_origin(annotation), get_args(annotation)
    if origin is Union:
        members = [a for a in args if a is not type(None)]
        if str in members:
            # functions are accepted from Python only
            return {'type' : 'string'}
        schema = _type_schema(members[0])
        if len(members) < len(args):
            schema['type'] = [schema['type'], 'null']
        return schema
    if origin in (tuple, list):
        return {'type' : 'array', 'items' : _type_schema(args[0] if args else Any)}
    if origin is dict or annotation is dict:
        return {'type' : 'object'}
    if annotation is Any:
        return {}
    return {'type' : JSON_TYPES[annotation]}

def _object_schema(cls, path : str = '') -> Dict[str, Any]:
    hints = get_type_hints(cls)
    defaults = cls()
    properties = {}
    for f in fields(cls):
        key = f'{path}.{f.name}' if path else f.name
        if key in HIDDEN:
            continue
        annotation = hints[f.name]
        if is_dataclass(annotation):
            properties[f.name] = _object_schema(annotation, key)
            continue
        schema = _type_schema(annotation)
        for name, limit in LIMITS.get(key, {}).items():
            if name == 'items':
                schema['items'] = {**schema['items'], **limit}
            else:
                schema[name] = limit
        schema['default'] = _json_value(getattr(defaults, f.name))
        properties[f.name] = schema
    return {'type' : 'object', 'additionalProperties' : False, 'properties' : properties}

def config_schema() -> Dict[str, Any]:
    '''JSON schema (draft 2020-12) of the run configuration.'''
    return {'$schema' : SCHEMA_DIALECT, 'title' : 'deepbf run configuration', **_object_schema(RunConfig)}

def _is_type(value, name : str) -> bool:
    if name == 'null':
        return value is None
    if name == 'boolean':
        return isinstance(value, bool)
    if isinstance(value, bool):
        return False
    return isinstance(value, {'integer' : int, 'number' : (int, float), 'string' : str,
                              'array' : list, 'object' : dict}[name])

BOUNDS = (
    ('minimum', operator.ge, 'at least'),
    ('maximum', operator.le, 'at most'),
    ('exclusiveMinimum', operator.gt, 'greater than'),
    ('exclusiveMaximum', operator.lt, 'less than'),
)

def validate(value, schema : Dict[str, Any], where : str = ''):
    '''Check ``value`` against the subset of JSON schema that ``config_schema`` emits.'''
    label = where or 'the run configuration'
    types = schema.get('type')
    if types is not None:
        types = [types] if isinstance(types, str) else types
        if not any(_is_type(value, t) for t in types):
            raise ConfigError(f'{label} has the wrong type: {value!r}, expected {" or ".join(types)}')
    if value is None:
        return
    if 'const' in schema and value != schema['const']:
        raise ConfigError(f'{label} must be {schema["const"]!r}, got {value!r}')
    if 'enum' in schema and value not in schema['enum']:
        raise ConfigError(f'{label} must be one of {schema["enum"]}, got {value!r}')
    for name, holds, words in BOUNDS:
        if name in schema and not holds(value, schema[name]):
            raise ConfigError(f'{label} must be {words} {schema[name]}, got {value!r}')
    if isinstance(value, list):
        if len(value) < schema.get('minItems', 0) or len(value) > schema.get('maxItems', len(value)):
            raise ConfigError(f'{label} has {len(value)} items')
        for i, item in enumerate(value):
            validate(item, schema.get('items', {}), f'{label}[{i}]')
    if isinstance(value, dict) and 'properties' in schema:
        known = schema['properties']
        unknown = sorted(set(value) - set(known))
        if unknown and schema.get('additionalProperties') is False:
            raise ConfigError(f'unknown key(s) {unknown} in {label}, expected a subset of {sorted(known)}')
        for name, item in value.items():
            validate(item, known[name], f'{where}.{name}' if where else name)

def _build(cls, document : Dict[str, Any], where : str, **extra):
    hints = get_type_hints(cls)
    kwargs = dict(extra)
    for name, value in document.items():
        if is_dataclass(hints[name]):
            value = _build(hints[name], value, f'{where}.{name}')
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except DeepBFError as error:
        raise ConfigError(f'invalid {where}: {error.reason}')
    except TypeError as error:
        raise ConfigError(f'invalid {where}: {error}')

SCHEMA = config_schema()

def parse_config(document : Dict[str, Any]) -> RunConfig:
    validate(document, SCHEMA)
    top = {k : v for k, v in document.items() if k in ('n', 'seed', 'direction', 'output')}
    sections = {
        name : _build(cls, document.get(name, {}), name)
        for name, cls in (('pair', PairSection), ('abc', AbcConfig), ('estimate', EstimateSection),
                          ('eval', EvalSection), ('criticize', CriticizeSection))
    }
    sections['train'] = _build(TrainConfig, document.get('train', {}), 'train', seed = top.get('seed', 0))
    try:
        sections['pair'].build()
    except DeepBFError as error:
        raise ConfigError(f'invalid pair: {error.reason}')
    return RunConfig(**top, **sections)

def load_config(path) -> RunConfig:
    try:
        document = read_json(path)
    except ValueError as error:
        raise ConfigError(f'{path} is not valid JSON: {error}')
    return parse_config(document)
