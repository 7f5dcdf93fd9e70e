//! Bundled Weyl-Heisenberg SIC fiducial vectors, found with
//! [`super::sic::find_fiducial`] at tolerance 1e-11 and frozen here as
//! `(re, im)` pairs. Larger dimensions are supported through file import.

#[rustfmt::skip]
pub(crate) fn bundled(d: usize) -> Option<&'static [(f64, f64)]> {
    match d {
        2 => Some(&[
            (-0.46488805157465357, 0.7566731355730393),
            (0.4471224267731325, -0.10680075318878544),
        ]),
        3 => Some(&[
            (-0.4146535558508921, 0.33701307170314315),
            (0.622234183757946, -0.5057235404293546),
            (0.24989786575480627, 0.09541486273792787),
        ]),
        4 => Some(&[
            (-0.6116548611005626, 0.4345177738766489),
            (0.35205361823937253, -0.3346260671286744),
            (0.39820789818945673, 0.04593367660929355),
            (0.13860665532826666, 0.14582538335726813),
        ]),
        5 => Some(&[
            (-0.33827937840782873, 0.3321084138137587),
            (0.26790925505092106, -0.14587507908823297),
            (0.30428677240608054, 0.2456128442884917),
            (-0.13997282954233617, -0.09890844215949857),
            (0.18479322523528727, -0.6824780126883395),
        ]),
        6 => Some(&[
            (-0.20173918701962051, 0.5849163342818237),
            (0.5102278885514367, -0.12129320757943794),
            (0.21467224600467572, 0.13458744592286645),
            (-0.02313307693203065, 0.08677613695387129),
            (0.24261743083651371, -0.4278963043368651),
            (-0.14940029222181678, -0.07474983963779401),
        ]),
        7 => Some(&[
            (-0.46933514643554236, 0.43564869432715797),
            (0.3990162064691114, -0.11502127133183655),
            (0.36496205805338766, 0.0643168846024931),
            (0.06793633105910171, -0.021765180420297757),
            (0.161529130300998, -0.3623536172747946),
            (-0.22986132041331064, 0.18339585123949698),
            (0.10138548068102463, -0.14466095358694916),
        ]),
        8 => Some(&[
            (0.01018505386101125, 0.325022395758355),
            (-0.17183914252286447, -0.04797718243618971),
            (0.05394738758195934, -0.2503307603390102),
            (0.35367434449173635, 0.09874524686028434),
            (-0.24278832025397776, -0.19395525821357776),
            (0.17183914252286447, 0.0479771824361897),
            (0.6182885287291155, -0.1284602973791166),
            (-0.35367434449173635, -0.09874524686028434),
        ]),
        9 => Some(&[
            (-0.427022768456796, 0.34685378316981197),
            (0.295942180854315, -0.14031507216923303),
            (0.12103444734141573, 0.035049090357661676),
            (0.031099052943964273, -0.01694239285742909),
            (0.21951099217914477, -0.38105035194744646),
            (-0.16667758178621309, 0.09620217504126871),
            (-0.07644449796100677, -0.1390658891531781),
            (0.4507048775804058, 0.11916876120481171),
            (0.03013855763338608, 0.3147915588983601),
        ]),
        31 => Some(&[
            (-0.020455749005917487, -0.0928843057770225),
            (-0.03660765534882803, 0.05406370448673911),
            (0.04769331202553804, -0.10961094464235763),
            (-0.164124318890105, -0.03483223933663082),
            (-0.0204608201201227, -0.1389603205047019),
            (0.004791500772415835, 0.015231682851758778),
            (0.052369792644999615, 0.19033072463721143),
            (0.10040076315251498, 0.08100735824189015),
            (0.0590780940855757, -0.23869342636786284),
            (0.003255166866217425, -0.15725067389547925),
            (0.12544212918700057, -0.11074713836934345),
            (0.022584658784552552, 0.006928725844196188),
            (-0.047529201445600106, -0.24433100808722777),
            (-0.07079479617690629, 0.15501942226524748),
            (0.1513950436954239, -0.05163622832857751),
            (-0.06604139045386138, 0.05708457474517518),
            (-0.09790088840166236, 0.12429567198811237),
            (0.1904608682635018, -0.021835296900543328),
            (-0.041419851680078675, -0.2877236402221474),
            (-0.17453050984899815, 0.0004631562828687043),
            (0.06757166487207357, -0.1565320561132897),
            (-0.0565896185988203, 0.1299043930242434),
            (0.040008280322918865, -0.08264966356491153),
            (0.1623554764699629, -0.13794983651036924),
            (-0.08227543432971442, 0.050907696271351346),
            (-0.34994404119693917, -0.19760418456657092),
            (-0.22832693593768388, 0.04703846793102757),
            (-0.04863414201154536, -0.03917000745118855),
            (0.2084793525757317, 0.14204240457687828),
            (0.0884551971062434, 0.19093968069831385),
            (-0.013963350755192373, -0.11723053061082578),
        ]),
        _ => None,
    }
}
