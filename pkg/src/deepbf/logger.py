import logging
import logging.config

logging.config.dictConfig({
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'standard': {
            'format': '[%(asctime)s][%(levelname)s] %(message)s',
            'datefmt': r'%Y-%m-%d %H:%M:%S'
        },
    },
    'handlers': {
        'file': {
            'level': 'INFO',
            'formatter': 'standard',
            'class': 'logging.FileHandler',
            'filename': 'deepbf.log',
            'mode': 'a',
            'encoding': 'utf-8',
            'delay': True,
        },
        'stderr': {
            'level': 'WARNING',
            'formatter': 'standard',
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
        },
    },
    'loggers': {
        'DeepBF': {
            'level': 'INFO',
            'handlers': ['file', 'stderr'],
            'propagate': False
        }
    }
})
logger = logging.getLogger('DeepBF')
