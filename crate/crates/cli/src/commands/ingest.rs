use std::path::PathBuf;

use linnaeus_core::ingest::{
    merge_records, parse_asrank, parse_eyeball, parse_ipinfo, parse_peeringdb, write_merged,
    CoverageReport, NoRdap, RdapClient, RdapLookup,
};

use super::{ensure_out_dir, load_taxonomy};
use crate::error::CliError;
use crate::manifest::Manifest;

pub struct IngestArgs {
    pub taxonomy: String,
    pub asrank: PathBuf,
    pub peeringdb: Option<PathBuf>,
    pub ipinfo: Option<PathBuf>,
    pub eyeball: Option<PathBuf>,
    pub rdap_endpoint: Option<String>,
    pub rdap_cache: Option<PathBuf>,
    pub rdap_parallel: usize,
    pub out: PathBuf,
}

pub fn run(args: IngestArgs) -> Result<(), CliError> {
    // The taxonomy is not needed to merge, but validating the flag early
    // keeps run manifests honest about their configuration.
    let _ = load_taxonomy(&args.taxonomy)?;
    ensure_out_dir(&args.out)?;
    let mut manifest = Manifest::new("ingest");
    manifest.arg("taxonomy", &args.taxonomy);

    let asrank_file =
        std::fs::File::open(&args.asrank).map_err(|e| CliError::data("--asrank", e))?;
    let asrank = parse_asrank(std::io::BufReader::new(asrank_file))?;
    manifest.input(&args.asrank)?;

    let peeringdb = match &args.peeringdb {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|e| CliError::data("--peeringdb", e))?;
            manifest.input(path)?;
            parse_peeringdb(std::io::BufReader::new(file))?
        }
        None => Default::default(),
    };
    let ipinfo = match &args.ipinfo {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|e| CliError::data("--ipinfo", e))?;
            manifest.input(path)?;
            parse_ipinfo(std::io::BufReader::new(file))?
        }
        None => Default::default(),
    };
    let eyeball = match &args.eyeball {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|e| CliError::data("--eyeball", e))?;
            manifest.input(path)?;
            parse_eyeball(std::io::BufReader::new(file))?
        }
        None => Default::default(),
    };

    let rdap_client;
    let rdap: &dyn RdapLookup = match &args.rdap_endpoint {
        Some(endpoint) => {
            let cache = args
                .rdap_cache
                .clone()
                .unwrap_or_else(|| args.out.join("rdap-cache"));
            rdap_client = RdapClient::new(endpoint, cache);
            // Warm the cache with bounded parallelism; the merge itself is a
            // single-threaded deterministic pass over cache hits.
            let candidates =
                linnaeus_core::ingest::rdap_candidates(&asrank.records, &peeringdb.records);
            rdap_client.prefetch(&candidates, args.rdap_parallel);
            &rdap_client
        }
        None => &NoRdap,
    };

    let outcome =
        merge_records(&asrank.records, &peeringdb.records, &ipinfo.records, &eyeball.records, &rdap);

    let merged_path = args.out.join("merged.ldjson");
    let mut file = std::fs::File::create(&merged_path)?;
    write_merged(&outcome.records, &mut file)?;

    let coverage =
        CoverageReport::compute(&asrank.records, &peeringdb.records, &ipinfo.records, &eyeball.records);
    let coverage_path = args.out.join("coverage.json");
    std::fs::write(
        &coverage_path,
        serde_json::to_string_pretty(&coverage).map_err(|e| CliError::Internal(e.to_string()))?,
    )?;
    print!("{}", coverage.render_text());
    println!(
        "merged {} records ({} foreign asns dropped, {} rdap lookups, {} lines skipped, {} duplicate asns last-wins)",
        outcome.records.len(),
        outcome.dropped_foreign_asns,
        outcome.rdap_lookups,
        asrank.skipped + peeringdb.skipped + ipinfo.skipped + eyeball.skipped,
        asrank.duplicate_asns
            + peeringdb.duplicate_asns
            + ipinfo.duplicate_asns
            + eyeball.duplicate_asns,
    );

    manifest.output(&merged_path)?;
    manifest.output(&coverage_path)?;
    manifest.write(&args.out)?;
    Ok(())
}
